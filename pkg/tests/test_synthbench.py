import json
import math

import numpy as np
import pytest

from roadlabel.errors import ConfigError, DimensionMismatchError, ValidationError
from roadlabel.synthbench import (
    DriftScenario,
    MetricsReport,
    evaluate_masks,
    generate_feed,
    load_scenario,
    make_scene,
    noise_texture,
    run_benchmark,
)

QUIET = dict(width=160, height=160, n_frames=4, walk_tx_std=0.0,
             walk_ty_std=0.0, walk_rot_std=0.0, walk_scale_std=0.0,
             brightness_jitter=0.0, contrast_jitter=0.0, noise_std=0.0)


# --- scene + feed generation ---------------------------------------------------


def test_scenario_validation():
    with pytest.raises(ConfigError):
        DriftScenario(width=16)
    with pytest.raises(ConfigError):
        DriftScenario(n_frames=0)
    with pytest.raises(ValidationError):
        make_scene(DriftScenario(texture_amplitude=0.0))


def test_noise_texture_deterministic_and_bounded():
    a = noise_texture(64, 48, seed=3)
    b = noise_texture(64, 48, seed=3)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (48, 64)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert not np.array_equal(a, noise_texture(64, 48, seed=4))


def test_scene_mask_marks_dark_road_region():
    img, road = make_scene(DriftScenario(width=128, height=128))
    assert road.dtype == bool
    assert 0.05 < road.mean() < 0.6  # plausible road coverage
    # road interior is darker than the untouched upper background
    assert img[road].mean() < img[:40, :].mean()


def test_feed_is_deterministic():
    scen = DriftScenario(width=96, height=96, n_frames=3, seed=11)
    f1 = generate_feed(scen)
    f2 = generate_feed(scen)
    for a, b in zip(f1.frames, f2.frames):
        np.testing.assert_array_equal(a.pixels, b.pixels)
    assert f1.transforms == f2.transforms
    assert generate_feed(scen).frames[1].pixels is not f1.frames[1].pixels


def test_zero_drift_zero_noise_feed_is_static():
    feed = generate_feed(DriftScenario(seed=1, **QUIET))
    first = feed.frames[0].pixels
    for frame, t in zip(feed.frames[1:], feed.transforms[1:]):
        np.testing.assert_array_equal(frame.pixels, first)
        assert t.tx == 0.0 and t.ty == 0.0 and t.rotation == 0.0
        assert t.scale == 1.0


def test_translation_only_walk_moves_mask_centroid():
    scen = DriftScenario(seed=2, **{**QUIET, "walk_tx_std": 3.0,
                                    "walk_ty_std": 3.0})
    feed = generate_feed(scen)
    for k in range(1, scen.n_frames):
        t = feed.transforms[k]
        assert t.rotation == 0.0 and t.scale == 1.0
        ys0, xs0 = np.nonzero(feed.masks[0].bits)
        ys, xs = np.nonzero(feed.masks[k].bits)
        # interior translations move the road centroid by (tx, ty)
        assert xs.mean() - xs0.mean() == pytest.approx(t.tx, abs=0.5)
        assert ys.mean() - ys0.mean() == pytest.approx(t.ty, abs=0.5)


def test_cumulative_drift_is_clamped_unless_stress():
    wild = {**QUIET, "n_frames": 40, "walk_tx_std": 20.0, "walk_ty_std": 20.0,
            "walk_rot_std": 0.2, "walk_scale_std": 0.1}
    feed = generate_feed(DriftScenario(seed=3, **wild))
    t_max = 0.20 * 160
    for t in feed.transforms:
        assert abs(t.tx) <= t_max and abs(t.ty) <= t_max
        assert abs(t.rotation) <= 0.20
        assert math.log(0.88) - 1e-9 <= math.log(t.scale) <= math.log(1.14) + 1e-9
    stressed = generate_feed(DriftScenario(seed=3, stress=True, **wild))
    assert any(abs(t.tx) > t_max or abs(t.rotation) > 0.20
               for t in stressed.transforms)


def test_feed_frame_metadata():
    feed = generate_feed(DriftScenario(width=64, height=64, n_frames=3, seed=4))
    assert [f.frame_id for f in feed.frames] == ["000000", "000001", "000002"]
    assert [f.timestamp for f in feed.frames] == [0.0, 1200.0, 2400.0]
    assert feed.reference_frame_id == "000000"
    ann = feed.reference_annotation()
    assert ann.camera_id == feed.camera_id
    np.testing.assert_array_equal(ann.manual_mask.bits, feed.masks[0].bits)


def test_occlusion_changes_pixels_not_truth():
    base = DriftScenario(seed=5, **QUIET)
    clean = generate_feed(base)
    occluded = generate_feed(DriftScenario(seed=5, **{**QUIET,
                                                      "occlusion_fraction": 0.1}))
    assert not np.array_equal(clean.frames[1].pixels, occluded.frames[1].pixels)
    np.testing.assert_array_equal(clean.masks[1].bits, occluded.masks[1].bits)


# --- metrics ---------------------------------------------------------------------


def _mask(bits):
    from roadlabel.imgcore import LabelMask
    return LabelMask(bits=bits, provenance="manual", source_frame_id="0")


def test_metrics_identical_masks():
    bits = np.zeros((10, 10), dtype=bool)
    bits[2:7, 2:7] = True
    m = evaluate_masks(_mask(bits), _mask(bits))
    assert m.iou == m.precision == m.recall == m.f1 == 1.0
    assert m.fp == m.fn == 0 and m.tp == 25


def test_metrics_disjoint_masks():
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    a[:2], b[6:] = True, True
    m = evaluate_masks(_mask(a), _mask(b))
    assert m.iou == m.precision == m.recall == m.f1 == 0.0


def test_metrics_dilated_prediction():
    truth = np.zeros((20, 20), dtype=bool)
    truth[5:10, 5:10] = True  # 25 px
    pred = np.zeros((20, 20), dtype=bool)
    pred[5:10, 5:15] = True  # 50 px, contains the truth
    m = evaluate_masks(_mask(pred), _mask(truth))
    assert m.precision == pytest.approx(0.5)
    assert m.recall == pytest.approx(1.0)
    assert m.iou == pytest.approx(0.5)
    assert m.f1 == pytest.approx(2 / 3)


def test_metrics_empty_vs_empty_is_perfect():
    empty = np.zeros((5, 5), dtype=bool)
    m = evaluate_masks(_mask(empty), _mask(empty))
    assert m.iou == m.precision == m.recall == 1.0


def test_metrics_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        evaluate_masks(_mask(np.zeros((4, 4), dtype=bool)),
                       _mask(np.zeros((5, 5), dtype=bool)))


def test_metric_identities_on_random_counts():
    rng = np.random.default_rng(0)
    for _ in range(300):
        tp, fp, fn, tn = (int(v) for v in rng.integers(0, 50, 4))
        m = MetricsReport.from_counts(tp, fp, fn, tn)
        assert m.f1 == pytest.approx(2.0 * m.iou / (1.0 + m.iou), abs=1e-12)
        assert m.iou <= min(m.precision, m.recall) + 1e-12


# --- end-to-end benchmark ----------------------------------------------------------


def test_benchmark_static_scene_scores_near_perfect(tmp_path):
    scen = DriftScenario(seed=6, **QUIET)
    report = run_benchmark(scen, out_dir=tmp_path)
    assert report.emitted == scen.n_frames - 1
    assert report.filter_rate == 0.0
    assert report.mean_corrected_iou >= 0.999
    assert report.mean_reuse_iou >= 0.999
    assert (tmp_path / "benchmark.txt").is_file()
    assert "mean_corrected_iou" in (tmp_path / "benchmark.txt").read_text()


def test_benchmark_drifting_scene_corrected_beats_reuse(tmp_path):
    scen = DriftScenario(width=192, height=192, n_frames=5, seed=7,
                         walk_tx_std=4.0, walk_ty_std=4.0)
    report = run_benchmark(scen, out_dir=tmp_path)
    assert report.emitted >= 3
    assert report.mean_corrected_iou > report.mean_reuse_iou
    assert report.mean_corrected_iou >= 0.95
    for o in report.outcomes:
        if o.corrected_iou is not None:
            assert o.translation_error_px is not None
            assert o.translation_error_px < 2.0


def test_benchmark_stress_scene_filters_hopeless_frames(tmp_path):
    scen = DriftScenario(width=160, height=160, n_frames=6, seed=8,
                         walk_tx_std=60.0, walk_ty_std=60.0,
                         walk_rot_std=0.5, stress=True)
    report = run_benchmark(scen, out_dir=tmp_path)
    assert report.emitted < scen.n_frames - 1  # some frames dropped
    for o in report.outcomes:
        if o.corrected_iou is not None:
            assert o.corrected_iou >= 0.9  # survivors are accurate


def test_benchmark_overlays_written_on_request(tmp_path):
    scen = DriftScenario(seed=9, **QUIET)
    run_benchmark(scen, out_dir=tmp_path, overlays=True)
    overlays = list((tmp_path / "overlays").glob("*.png"))
    assert len(overlays) == scen.n_frames - 1


# --- scenario files -------------------------------------------------------------------


def test_load_scenario_round_trip(tmp_path):
    path = tmp_path / "scen.json"
    path.write_text(json.dumps({"name": "demo", "width": 64, "height": 48,
                                "n_frames": 3, "seed": 12, "stress": True}))
    scen = load_scenario(path)
    assert scen == DriftScenario(name="demo", width=64, height=48, n_frames=3,
                                 seed=12, stress=True)


def test_load_scenario_rejects_unknown_keys(tmp_path):
    path = tmp_path / "scen.json"
    path.write_text(json.dumps({"widht": 64}))
    with pytest.raises(ConfigError):
        load_scenario(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_scenario(path)
