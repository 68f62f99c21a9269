import numpy as np
import pytest

from rcbind.render import (
    BACKGROUND,
    DEFAULT_PALETTE,
    assignment_rgb,
    check_palette,
    encode_pgm,
    encode_ppm,
    labels_rgb,
    parse_pnm,
    read_binary_image,
    read_pnm,
    render_assignment,
    render_image,
)


def test_default_palette():
    assert len(DEFAULT_PALETTE) == 12
    check_palette(DEFAULT_PALETTE)
    with pytest.raises(ValueError):
        check_palette([(1, 2, 3), (1, 2, 3)])
    with pytest.raises(ValueError):
        check_palette([BACKGROUND])


def test_one_hot_is_saturated():
    k = np.array([0, 1, 2, 1])
    rgb = assignment_rgb(np.eye(3)[k], 2, 2)
    np.testing.assert_array_equal(rgb.reshape(-1, 3), np.array(DEFAULT_PALETTE)[k])


def test_uniform_gamma_blends_fully():
    K = 4
    rgb = assignment_rgb(np.full((6, K), 1 / K), 3, 2).reshape(-1, 3)
    # every pixel is the first colour scaled by 1/K toward black
    expect = np.round(np.array(DEFAULT_PALETTE[0]) / K).astype(np.uint8)
    assert (rgb == expect).all()


def test_blend_toward_custom_background():
    bg = (255, 255, 255)
    pal = [(0, 0, 0), (255, 0, 0)]
    rgb = assignment_rgb(np.array([[0.75, 0.25]]), 1, 1, pal, bg)
    np.testing.assert_array_equal(rgb[0, 0], [64, 64, 64])


def test_unlit_pixels_are_background():
    g = np.eye(2)[[0, 1, 0]]
    rgb = assignment_rgb(g, 3, 1, image=np.array([1, 0, 1]))
    np.testing.assert_array_equal(rgb[0, 1], BACKGROUND)
    np.testing.assert_array_equal(rgb[0, 0], DEFAULT_PALETTE[0])


def test_palette_too_small():
    with pytest.raises(ValueError, match="palette"):
        assignment_rgb(np.full((4, 13), 1 / 13), 2, 2)


def test_labels_rgb():
    rgb = labels_rgb(np.array([-1, 0, -2, 1]), 2, 2).reshape(-1, 3)
    np.testing.assert_array_equal(rgb, [BACKGROUND, DEFAULT_PALETTE[0], (255, 255, 255), DEFAULT_PALETTE[1]])


def test_ppm_round_trip(tmp_path):
    g = np.random.default_rng(0).dirichlet(np.ones(3), size=7 * 5)
    p = tmp_path / "a.ppm"
    render_assignment(g, 7, 5, p)
    data = p.read_bytes()
    assert data.startswith(b"P6\n7 5\n255\n")
    assert len(data) == len(b"P6\n7 5\n255\n") + 7 * 5 * 3
    arr, maxval = read_pnm(p)
    assert arr.shape == (5, 7, 3) and maxval == 255
    np.testing.assert_array_equal(arr, assignment_rgb(g, 7, 5))


def test_pgm_round_trip(tmp_path):
    x = (np.random.default_rng(1).random(6 * 4) < 0.5).astype(float)
    p = tmp_path / "x.pgm"
    render_image(x, 6, 4, p)
    assert p.read_bytes().startswith(b"P5\n6 4\n255\n")
    px, w, h = read_binary_image(p)
    assert (w, h) == (6, 4)
    np.testing.assert_array_equal(px, x)


def test_parse_ascii_pgm_with_comment():
    arr, maxval = parse_pnm(b"P2\n# hand drawn\n3 2\n15\n0 15 0\n15 0 7\n")
    assert maxval == 15
    np.testing.assert_array_equal(arr, [[0, 15, 0], [15, 0, 7]])


def test_sixteen_bit_pgm():
    body = np.array([[0, 1000]], dtype=">u2").tobytes()
    arr, maxval = parse_pnm(b"P5 2 1 1000\n" + body)
    np.testing.assert_array_equal(arr, [[0, 1000]])


def test_pnm_errors():
    with pytest.raises(ValueError, match="magic"):
        parse_pnm(b"P3\n1 1\n255\n0 0 0")
    with pytest.raises(ValueError, match="truncated"):
        parse_pnm(encode_pgm(np.ones(4), 2, 2)[:-1])
    with pytest.raises(ValueError, match="truncated"):
        parse_pnm(encode_ppm(np.zeros((2, 2, 3)))[:-2])
