import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from asnet.dataio import (ATTRIBUTE_NAMES, FIXTURES, FULL_OCCLUSION, AttributeSet, FrameList, GroupSequence,
                          SynthConfig, ViewSequence, fixture_config, list_groups, load_group, load_results,
                          read_groundtruth, render_group, save_group, save_results, synth_group, target_centers,
                          write_groundtruth)
from asnet.errors import DatasetError, ParameterError
from asnet.eval import Trajectory


def tiny_cfg(**kw):
    base = dict(group_id="tiny", views=2, frames=10, width=96, height=64, target_size=(16, 16))
    return SynthConfig(**{**base, **kw})


def write_group(root, counts=(10, 10), gt_override=None):
    g = root / "g1"
    g.mkdir()
    (g / "attributes.txt").write_text("1,0,0,0,0,0,0,0,0,0\n")
    frame = np.zeros((8, 8, 3), dtype=np.uint8)
    from asnet.imaging import save_frame
    for k, n in enumerate(counts, 1):
        d = g / f"drone{k}"
        d.mkdir()
        for i in range(1, n + 1):
            save_frame(frame, d / f"img{i:06d}.png")
        (d / "groundtruth.txt").write_text(gt_override or "".join("10,20,30,40\n" for _ in range(n)))
    return g


# --- attributes --------------------------------------------------------------

def test_attribute_set_defaults_and_order():
    a = AttributeSet({"NIGHT": 1, "IV": 1})
    assert a.as_list() == [0, 1, 0, 0, 0, 0, 0, 0, 1, 0]
    assert AttributeSet.from_list(a.as_list()) == a
    assert len(ATTRIBUTE_NAMES) == 10


def test_attribute_day_night_exclusive():
    with pytest.raises(ParameterError):
        AttributeSet({"DAY": 1, "NIGHT": 1})
    with pytest.raises(ParameterError):
        AttributeSet({"FOG": 1})


# --- groups on disk ----------------------------------------------------------

def test_load_well_formed_group(tmp_path):
    group = load_group(write_group(tmp_path))
    assert group.n_views == 2 and group.n_frames == 10
    assert group.views[0].groundtruth[0].tolist() == [10, 20, 30, 40]
    assert group.attributes["DAY"] == 1
    assert group.views[0].frames[3].shape == (8, 8, 3)
    assert list_groups(tmp_path) == ["g1"]


def test_unsynchronized_views_name_both_counts(tmp_path):
    d = write_group(tmp_path, counts=(10, 9), gt_override=None)
    (d / "drone2" / "groundtruth.txt").write_text("1,1,1,1\n" * 9)
    with pytest.raises(DatasetError, match=r"10.*9"):
        load_group(d)


@pytest.mark.parametrize("line", ["1,2,3", "a,b,c,d", "1,2,0,4", "NaN,1,2,3", "1,2,inf,3"])
def test_malformed_groundtruth_reports_line(tmp_path, line):
    p = tmp_path / "gt.txt"
    p.write_text("1,2,3,4\n" + line + "\n")
    with pytest.raises(DatasetError, match=r"gt.txt:2"):
        read_groundtruth(p)


def test_groundtruth_nan_round_trip(tmp_path):
    boxes = np.array([[1.5, 2.25, 3, 4], [np.nan] * 4])
    write_groundtruth(tmp_path / "gt.txt", boxes)
    assert "NaN,NaN,NaN,NaN" in (tmp_path / "gt.txt").read_text()
    assert np.array_equal(read_groundtruth(tmp_path / "gt.txt"), boxes, equal_nan=True)


def test_missing_pieces(tmp_path):
    with pytest.raises(DatasetError):
        load_group(tmp_path / "nope")
    g = write_group(tmp_path)
    (g / "drone1" / "groundtruth.txt").unlink()
    with pytest.raises(DatasetError, match="missing ground truth"):
        load_group(g)
    (g / "attributes.txt").write_text("1,0,1\n")


def test_bad_attribute_file(tmp_path):
    g = write_group(tmp_path)
    (g / "attributes.txt").write_text("1,0,1\n")
    with pytest.raises(DatasetError, match="attributes.txt"):
        load_group(g)


def test_group_invariants():
    frames = FrameList(arrays=[np.zeros((4, 4))] * 3)
    with pytest.raises(DatasetError):
        GroupSequence("g", [ViewSequence("drone1", frames, np.ones((2, 4)))], AttributeSet({}))


# --- results files -----------------------------------------------------------

def _random_results(rng, V=2, n=5):
    trajs = [Trajectory(np.round(rng.uniform(1, 100, (n, 4)), 2), rng.standard_normal(n)) for _ in range(V)]
    return trajs, rng.integers(0, V, n)


def test_results_round_trip(tmp_path, rng):
    trajs, sel = _random_results(rng)
    saved = save_results(trajs, sel, tmp_path / "r.txt", "seq", "abc123")
    assert load_results(tmp_path / "r.txt") == saved
    assert saved.has_selection


@settings(max_examples=25)
@given(st.integers(1, 3), st.integers(0, 6), st.integers(0, 2**31))
def test_results_round_trip_property(tmp_path_factory, V, n, seed):
    rng = np.random.default_rng(seed)
    trajs = [Trajectory(rng.uniform(1, 500, (n, 4)).reshape(n, 4), rng.standard_normal(n) * 1e3)
             for _ in range(V)]
    path = tmp_path_factory.mktemp("r") / "r.txt"
    saved = save_results(trajs, None, path)
    assert load_results(path) == saved
    assert np.array_equal(saved.boxes, np.round(np.array([t.boxes for t in trajs]).reshape(V, n, 4), 2))


def test_empty_results_are_header_only(tmp_path):
    save_results([Trajectory(np.zeros((0, 4)), np.zeros(0))], None, tmp_path / "r.txt")
    assert len((tmp_path / "r.txt").read_text().splitlines()) == 1
    assert load_results(tmp_path / "r.txt").n_frames == 0


def test_fractional_boxes_keep_two_decimals(tmp_path):
    t = Trajectory(np.array([[1.234, 5.678, 10.006, 20.0]]), np.array([0.5]))
    res = load_results(save_results([t], [0], tmp_path / "r.txt") and tmp_path / "r.txt")
    assert res.boxes[0, 0].tolist() == [1.23, 5.68, 10.01, 20.0]


@pytest.mark.parametrize("body, msg", [
    ("0,0,1,1,1,1,0.5\n", "8 fields"),
    ("0,0,1,1,1,1,0.5,x\n", "malformed"),
    ("0,3,1,1,1,1,0.5,0\n", "out of range"),
    ("0,0,1,1,1,1,0.5,0\n0,0,1,1,1,1,0.5,0\n", "duplicate"),
    ("0,0,1,1,1,1,0.5,0\n", "expected 2 rows"),
])
def test_results_parse_errors(tmp_path, body, msg):
    p = tmp_path / "r.txt"
    p.write_text("# sequence=s config=c views=2 frames=1\n" + body)
    with pytest.raises(DatasetError, match=msg):
        load_results(p)


def test_inconsistent_selection_rejected(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("# sequence=s config=c views=2 frames=1\n0,0,1,1,1,1,0.5,0\n0,1,1,1,1,1,0.5,1\n")
    with pytest.raises(DatasetError, match="inconsistent"):
        load_results(p)


def test_bad_header(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("frame,view\n")
    with pytest.raises(DatasetError, match="header"):
        load_results(p)


# --- synthetic scenes --------------------------------------------------------

def test_synth_is_deterministic():
    a, b = render_group(tiny_cfg(seed=3)), render_group(tiny_cfg(seed=3))
    for va, vb in zip(a.views, b.views):
        assert all(np.array_equal(x, y) for x, y in zip(va.frames, vb.frames))
        assert np.array_equal(va.groundtruth, vb.groundtruth)
    c = render_group(tiny_cfg(seed=4))
    assert not np.array_equal(a.views[0].frames[0], c.views[0].frames[0])


def test_static_target_has_constant_groundtruth():
    g = render_group(tiny_cfg())
    gt = g.views[0].groundtruth
    assert np.all(gt == gt[0])


def test_occlusion_bookkeeping():
    cfg = tiny_cfg(frames=60, occlusions=[{"view": 0, "start": 30, "end": 50}])
    g = render_group(cfg)
    occ0, occ1 = g.views[0].occlusion, g.views[1].occlusion
    assert np.all(occ0[30:51] == FULL_OCCLUSION) and np.all(occ0[:30] == 0) and np.all(occ0[51:] == 0)
    assert np.all(occ1 == 0)
    assert g.attributes["FOC"] == 1 and g.attributes["POC"] == 0


def test_groundtruth_matches_rendered_pixels():
    cfg = SynthConfig(views=1, frames=3, width=120, height=90, target_size=(20, 20), start=(50, 40),
                      velocity=(3, 2), noise=0.0, seed=1)
    clean = render_group(cfg)
    blank = render_group(dataclasses.replace(cfg, occlusions=[{"view": 0, "start": 0, "end": 2}]))
    for t in range(3):
        diff = np.any(clean.views[0].frames[t] != blank.views[0].frames[t], axis=2)
        ys, xs = np.nonzero(diff)
        x, y, w, h = clean.views[0].groundtruth[t]
        assert xs.min() >= np.floor(x) and xs.max() < np.ceil(x + w)
        assert ys.min() >= np.floor(y) and ys.max() < np.ceil(y + h)


def test_view_transform_maps_groundtruth():
    cfg = tiny_cfg(view_transforms=[[1, 0, 0, 0, 1, 0], [0.5, 0, 10, 0, 0.5, 5]])
    g = render_group(cfg)
    x, y, w, h = g.views[0].groundtruth[0]
    assert np.allclose(g.views[1].groundtruth[0], [0.5 * x + 10, 0.5 * y + 5, 0.5 * w, 0.5 * h])
    assert g.attributes["VC"] == 1


def test_target_bounces_inside_frame():
    cfg = tiny_cfg(frames=80, velocity=(5, 3))
    c = target_centers(cfg)
    assert np.all((c[:, 0] >= 8) & (c[:, 0] <= 88) & (c[:, 1] >= 8) & (c[:, 1] <= 56))


def test_jumps_are_applied_once():
    c = target_centers(tiny_cfg(width=400, jumps=[(5, 100, 0)]))
    assert c[5, 0] - c[4, 0] == 100 and c[6, 0] == c[5, 0]


@pytest.mark.parametrize("kw", [dict(occlusions=[{"view": 0, "start": 5, "end": 10}]),
                                dict(occlusions=[{"view": 2, "start": 0, "end": 1}]),
                                dict(jumps=[(0, 1, 1)]), dict(views=0),
                                dict(view_transforms=[[1, 0, 0, 0, 1, 0]])])
def test_invalid_synth_configs(kw):
    with pytest.raises(ParameterError):
        tiny_cfg(**kw)


def test_synth_group_saves_and_loads(tmp_path):
    g = synth_group(tiny_cfg(occlusions=[{"view": 1, "start": 2, "end": 4, "kind": "partial"}]), tmp_path)
    back = load_group(tmp_path / "tiny")
    assert back.n_views == 2 and back.n_frames == 10
    assert back.attributes == g.attributes
    assert np.array_equal(back.views[1].occlusion, g.views[1].occlusion)
    assert np.allclose(back.views[0].groundtruth, g.views[0].groundtruth)
    assert np.array_equal(back.views[0].frames[4], g.views[0].frames[4])


def test_save_group_round_trips_metadata(tmp_path):
    g = render_group(tiny_cfg(frames=4))
    save_group(g, tmp_path)
    back = load_group(tmp_path / g.group_id)
    for a, b in zip(g.views, back.views):
        assert np.array_equal(a.groundtruth, b.groundtruth)
        assert a.name == b.name


def test_named_fixtures_load():
    for name in FIXTURES:
        cfg = fixture_config(name, seed=7)
        assert cfg.seed == 7 and name.split("_")[0] in cfg.group_id
    with pytest.raises(ParameterError):
        fixture_config("rain")


def test_synth_config_from_toml(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text('views = 1\nframes = 5\nwidth = 64\nheight = 48\nnoise = 0.0\n')
    assert SynthConfig.from_toml(p).frames == 5
    p.write_text("colour = 1\n")
    with pytest.raises(ParameterError):
        SynthConfig.from_toml(p)
