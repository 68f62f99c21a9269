from .container import DatasetFormatError, dump_dataset, load_dataset, parse_dataset, save_dataset
from .generators import (
    DATASETS,
    GEOMETRY,
    SPLITS,
    TRUE_OBJECTS,
    DatasetSpec,
    LabeledExample,
    bar_masks,
    binarize,
    generate,
    make_example,
    stack_images,
)
from .idx import IdxError, dump_idx, load_idx, parse_idx, write_idx
from .stencils import corner_stencil, default_pattern_bank, parse_patterns, shape_stencil

__all__ = [
    "DATASETS", "GEOMETRY", "SPLITS", "TRUE_OBJECTS", "DatasetSpec", "LabeledExample",
    "bar_masks", "binarize", "generate", "make_example", "stack_images",
    "DatasetFormatError", "dump_dataset", "load_dataset", "parse_dataset", "save_dataset",
    "IdxError", "dump_idx", "load_idx", "parse_idx", "write_idx",
    "corner_stencil", "default_pattern_bank", "parse_patterns", "shape_stencil",
]
