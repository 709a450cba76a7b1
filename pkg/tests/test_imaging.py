import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asnet.errors import InvalidBoxError, ParameterError, ShapeError
from asnet.imaging import (BoundingBox, GradientFeatures, IntensityFeatures, cosine_window, crop_resample, embed,
                           embed_with_stats, extract_patch, gaussian_weight_map, load_frame, make_extractor,
                           save_frame, search_geometry)
from conftest import textured_frame


# --- boxes -------------------------------------------------------------------

@pytest.mark.parametrize("args", [(0, 0, 0, 5), (0, 0, 5, -1), (np.nan, 0, 5, 5), (0, 0, np.inf, 5)])
def test_invalid_boxes(args):
    with pytest.raises(InvalidBoxError):
        BoundingBox(*args)


def test_box_center_round_trip():
    b = BoundingBox.from_center(50.0, 30.0, 20.0, 10.0)
    assert b.as_array().tolist() == [40.0, 25.0, 20.0, 10.0]
    assert b.center == (50.0, 30.0)
    assert b.area == 200.0


# --- patches -----------------------------------------------------------------

def test_identity_crop():
    frame = textured_frame(100, 100)
    patch = extract_patch(frame, BoundingBox(40, 40, 20, 20), 1.0, 20)
    assert np.array_equal(patch, frame[40:60, 40:60].astype(float))


def test_corner_crop_replicates_edges():
    frame = textured_frame(60, 80)
    patch = extract_patch(frame, BoundingBox(-10, -10, 20, 20), 2.0, 40)
    # pad 2 around a box centred on (0, 0): the top-left quadrant lies outside the frame
    assert np.array_equal(patch[:20, :20], np.broadcast_to(frame[0, 0].astype(float), (20, 20, 3)))
    assert np.array_equal(patch[20:, 20:], frame[:20, :20].astype(float))


def test_constant_frame_stays_constant():
    frame = np.full((50, 70, 3), 128, dtype=np.uint8)
    patch = extract_patch(frame, BoundingBox(33.3, -5.5, 17.2, 9.9), 1.7, 23)
    assert np.all(patch == 128.0)


def test_crop_matches_scipy_bilinear(rng):
    from scipy import ndimage
    frame = textured_frame(40, 50)
    gray = frame.mean(axis=2)
    out = crop_resample(gray, (20.3, 17.8), (15.0, 11.0), (9, 13))
    ys = 17.8 - 5.5 + (np.arange(9) + 0.5) * 11.0 / 9 - 0.5
    xs = 20.3 - 7.5 + (np.arange(13) + 0.5) * 15.0 / 13 - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    want = ndimage.map_coordinates(gray, [yy, xx], order=1)
    assert np.allclose(out, want, atol=1e-9)


def test_patch_rejects_bad_parameters():
    frame = textured_frame(20, 20)
    with pytest.raises(ParameterError):
        extract_patch(frame, BoundingBox(0, 0, 5, 5), 0.5, 8)
    with pytest.raises(ParameterError):
        crop_resample(frame, (5, 5), (4, 4), (0, 4))


@given(st.floats(-200, 400), st.floats(-200, 400), st.floats(1, 300), st.floats(1, 300))
def test_crop_never_reads_out_of_bounds(cx, cy, w, h):
    frame = np.arange(12 * 16, dtype=np.uint8).reshape(12, 16)
    out = crop_resample(frame, (cx, cy), (w, h), (7, 5))
    assert out.shape == (7, 5)
    assert out.min() >= frame.min() and out.max() <= frame.max()


def test_frame_png_round_trip(tmp_path):
    frame = textured_frame(30, 40)
    save_frame(frame, tmp_path / "f.png")
    assert np.array_equal(load_frame(tmp_path / "f.png"), frame)


# --- features ----------------------------------------------------------------

def test_constant_patch_gives_zero_features():
    feat = embed(np.full((16, 16, 3), 77, dtype=np.uint8), GradientFeatures())
    assert feat.shape == (8, 8, 4)
    assert np.all(feat == 0)


def test_cell_size_one_keeps_shape():
    patch = textured_frame(12, 18)
    assert embed(patch, GradientFeatures(cell_size=1)).shape == (12, 18, 4)


def test_indivisible_patch_rejected():
    with pytest.raises(ShapeError):
        embed(np.zeros((15, 16)), GradientFeatures(cell_size=2))


def test_step_edge_gradient_matches_finite_difference():
    patch = np.zeros((10, 12))
    patch[:, 6:] = 255.0
    feat = embed(patch, GradientFeatures(cell_size=1, norm="none"))
    gray = patch / 255.0
    padded = np.pad(gray, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2
    assert np.allclose(feat[..., 1], gx)
    assert set(np.argmax(feat[..., 1], axis=1)) == {5}


def test_default_features_are_standardized():
    feat = embed(textured_frame(32, 32), GradientFeatures())
    assert np.allclose(feat.mean(axis=(0, 1)), 0, atol=1e-12)
    assert np.allclose(feat.std(axis=(0, 1)), 1, atol=1e-12)


def test_centered_features_keep_scale():
    feat = embed(textured_frame(32, 32), GradientFeatures(norm="center"))
    raw = GradientFeatures(norm="none").raw(textured_frame(32, 32))
    assert np.allclose(feat.mean(axis=(0, 1)), 0, atol=1e-12)
    assert np.allclose(feat.std(axis=(0, 1)), raw.std(axis=(0, 1)))


def test_features_invariant_to_gain():
    patch = textured_frame(32, 32).astype(float) * 0.5
    a = embed(patch, GradientFeatures())
    b = embed(patch * 1.6, GradientFeatures())
    assert np.allclose(a, b, atol=1e-9)


def test_embed_with_stats_reuses_statistics():
    ext = GradientFeatures()
    a = textured_frame(32, 32, seed=1)
    b = textured_frame(32, 32, seed=2)
    fa, stats = embed_with_stats(a, ext)
    assert np.array_equal(fa, embed(a, ext))
    fb, same = embed_with_stats(b, ext, stats)
    assert same is stats
    raw = ext.raw(b)
    assert np.allclose(fb, (raw - stats[0]) / stats[1])


def test_embed_with_stats_falls_back_for_plain_extractors():
    feat, stats = embed_with_stats(textured_frame(8, 8), IntensityFeatures())
    assert stats is None and feat.shape == (8, 8, 1)


@given(st.integers(0, 3), st.integers(0, 3))
def test_embed_translation_consistent_at_cell_granularity(dy, dx):
    """Shifting by whole cells shifts the gradient channels by whole cells (interior only)."""
    cell = 2
    frame = textured_frame(48, 48, seed=3)
    ext = GradientFeatures(cell_size=cell, norm="none")
    a = embed(frame[8:40, 8:40], ext)
    b = embed(frame[8 + cell * dy:40 + cell * dy, 8 + cell * dx:40 + cell * dx], ext)
    inner_a = a[1 + dy:-1, 1 + dx:-1, 1:]
    inner_b = b[1:-1 - dy or None, 1:-1 - dx or None, 1:]
    assert np.allclose(inner_a, inner_b)


def test_make_extractor():
    assert make_extractor("gradient", 4).cell_size == 4
    assert make_extractor("gradient", 2, "center").norm == "center"
    assert make_extractor("intensity", 1).channels == 1
    with pytest.raises(ParameterError):
        make_extractor("cnn")
    with pytest.raises(ParameterError):
        GradientFeatures(norm="l2")


# --- windows -----------------------------------------------------------------

def test_hann_degenerate():
    assert cosine_window(1, 1)[0, 0, 0] == 1.0


def test_hann_symmetric():
    w = cosine_window(4, 4)[..., 0]
    assert np.allclose(w, w[::-1]) and np.allclose(w, w[:, ::-1])


def test_hann_matches_direct_formula():
    n = 8
    h = [0.5 - 0.5 * math.cos(2 * math.pi * k / (n - 1)) for k in range(n)]
    assert np.allclose(cosine_window(n, n)[..., 0], np.outer(h, h))


def test_hann_ring_and_center():
    w = cosine_window(9, 7)[..., 0]
    assert np.all(w[0] == 0) and np.all(w[:, 0] == 0) and np.all(w[-1] == 0) and np.all(w[:, -1] == 0)
    assert w[4, 3] == w.max() == 1.0
    assert w.min() >= 0


def test_gaussian_center_and_corner():
    g = gaussian_weight_map(5, 5, 1.0)[..., 0]
    assert g[2, 2] == 1.0
    assert g[0, 0] == pytest.approx(math.exp(-4))


def test_gaussian_rejects_bad_sigma():
    with pytest.raises(ParameterError):
        gaussian_weight_map(5, 5, 0.0)
    with pytest.raises(ParameterError):
        cosine_window(0, 3)


# --- search geometry ---------------------------------------------------------

def test_search_geometry_default_sizes():
    geo = search_geometry(BoundingBox(100, 100, 64, 64), 2.0, 64, 2)
    assert geo.out_hw == (128, 128)
    assert geo.map_shape == (64, 64)
    assert geo.cell_pixels == (2.0, 2.0)


def test_search_geometry_full_frame_is_capped():
    geo = search_geometry(BoundingBox(10, 10, 40, 40), 50.0, 64, 2, frame_shape=(360, 640, 3))
    assert geo.region_wh[0] <= 640 and geo.region_wh[1] <= 360
    full = search_geometry(BoundingBox(10, 10, 40, 40), 2.0, 64, 2, frame_shape=(360, 640, 3), full_frame=True)
    assert full.region_wh == pytest.approx((640, 360), abs=1.0)
