import json

import numpy as np
import pytest

from conftest import gray_frame, square_mask
from roadlabel.chaingraph import (
    ChainResult,
    STATUS_FILTERED,
    STATUS_OK,
    STATUS_UNREACHABLE,
)
from roadlabel.errors import ConfigError, DataIOError
from roadlabel.imgcore import (
    PROVENANCE_MANUAL,
    SimilarityTransform,
    load_mask,
    save_mask,
)
from roadlabel.transfer import (
    DatasetManifest,
    FeedAnnotation,
    ManifestEntry,
    MODE_BASELINE,
    MODE_CORRECTED,
    MODE_REUSE,
    emit_baseline,
    emit_corrected,
    emit_reuse,
    load_annotations,
)

SIZE = 24


def _feed(cam, n=3):
    rng = np.random.default_rng(hash(cam) % 2**32)
    return [gray_frame(rng.random((SIZE, SIZE)), camera_id=cam,
                       frame_id=f"{k:06d}", timestamp=1200.0 * k)
            for k in range(n)]


def _annotation(cam, **kwargs):
    return FeedAnnotation(camera_id=cam, reference_frame_id="000000",
                          manual_mask=square_mask(SIZE, 4, 16), **kwargs)


def _ok_chain(fid, tx=0.0, product=1.0):
    return ChainResult(target_frame_id=fid, path=("000000", fid),
                       composed=SimilarityTransform(tx=tx),
                       product=product, status=STATUS_OK)


# --- baseline -----------------------------------------------------------------


def test_baseline_emits_one_reference_per_feed(tmp_path):
    feeds = {"a": _feed("a"), "b": _feed("b")}
    anns = [_annotation("a"), _annotation("b")]
    manifest, report = emit_baseline(feeds, anns, tmp_path)
    assert len(manifest.entries) == 2
    assert all(e.mode == MODE_BASELINE for e in manifest.entries)
    assert all(e.chain_length == 0 and e.response_product == 1.0
               for e in manifest.entries)
    assert {e.camera_id for e in manifest.entries} == {"a", "b"}
    assert report.lines == ()
    for e in manifest.entries:
        assert (tmp_path / e.frame_path).is_file()
        assert (tmp_path / e.mask_path).is_file()
    assert (tmp_path / "manifest.ndjson").is_file()
    assert (tmp_path / "report.txt").is_file()


def test_baseline_reports_unusable_feeds(tmp_path):
    feeds = {"a": _feed("a"), "b": _feed("b"), "c": _feed("c")}
    anns = [
        _annotation("a"),
        FeedAnnotation(camera_id="b", reference_frame_id="999999",
                       manual_mask=square_mask(SIZE, 4, 16)),
        FeedAnnotation(camera_id="d", reference_frame_id="000000",
                       manual_mask=square_mask(SIZE, 4, 16)),
    ]
    manifest, report = emit_baseline(feeds, anns, tmp_path)
    assert [e.camera_id for e in manifest.entries] == ["a"]
    text = "\n".join(report.lines)
    assert "reference frame not in feed" in text
    assert "no annotation for feed" in text  # camera c
    assert "annotation without feed" in text  # camera d


def test_baseline_rejects_duplicate_annotations(tmp_path):
    feeds = {"a": _feed("a")}
    with pytest.raises(ConfigError):
        emit_baseline(feeds, [_annotation("a"), _annotation("a")], tmp_path)


def test_baseline_reports_mask_dimension_mismatch(tmp_path):
    feeds = {"a": _feed("a")}
    anns = [FeedAnnotation(camera_id="a", reference_frame_id="000000",
                           manual_mask=square_mask(SIZE + 1, 4, 16))]
    manifest, report = emit_baseline(feeds, anns, tmp_path)
    assert manifest.entries == ()
    assert any("dimensions" in line for line in report.lines)


# --- reuse ---------------------------------------------------------------------


def test_reuse_copies_mask_to_every_frame(tmp_path):
    feeds = {"a": _feed("a", n=4)}
    manifest, _ = emit_reuse(feeds, [_annotation("a")], tmp_path)
    assert len(manifest.entries) == 4
    manual = square_mask(SIZE, 4, 16)
    for e in manifest.entries:
        assert e.mode == MODE_REUSE
        loaded = load_mask(tmp_path / e.mask_path)
        np.testing.assert_array_equal(loaded.bits, manual.bits)


def test_reuse_subtracts_exclusion_only_on_its_frame(tmp_path):
    excl = square_mask(SIZE, 10, 20)
    feeds = {"a": _feed("a", n=3)}
    anns = [_annotation("a", exclusion_masks={"000001": excl})]
    manifest, _ = emit_reuse(feeds, anns, tmp_path)
    manual = square_mask(SIZE, 4, 16)
    by_frame = {e.frame_path.split("/")[-1]: e for e in manifest.entries}
    plain = load_mask(tmp_path / by_frame["000000.png"].mask_path)
    carved = load_mask(tmp_path / by_frame["000001.png"].mask_path)
    np.testing.assert_array_equal(plain.bits, manual.bits)
    np.testing.assert_array_equal(carved.bits, manual.bits & ~excl.bits)
    assert carved.bits.sum() < manual.bits.sum()


# --- corrected -------------------------------------------------------------------


def test_corrected_with_identity_chains_matches_reuse(tmp_path):
    feeds = {"a": _feed("a", n=3)}
    anns = [_annotation("a")]
    chains = {"a": [_ok_chain("000001"), _ok_chain("000002")]}
    corrected, _ = emit_corrected(feeds, anns, chains, tmp_path / "c")
    reuse, _ = emit_reuse(feeds, anns, tmp_path / "r")
    assert len(corrected.entries) == len(reuse.entries)
    for ce, re in zip(corrected.entries, reuse.entries):
        c_bits = load_mask(tmp_path / "c" / ce.mask_path).bits
        r_bits = load_mask(tmp_path / "r" / re.mask_path).bits
        np.testing.assert_array_equal(c_bits, r_bits)


def test_corrected_warps_mask_through_chain(tmp_path):
    feeds = {"a": _feed("a", n=2)}
    chains = {"a": [_ok_chain("000001", tx=4.0, product=0.9)]}
    manifest, _ = emit_corrected(feeds, [_annotation("a")], chains, tmp_path)
    entry = next(e for e in manifest.entries if "000001" in e.frame_path)
    assert entry.chain_length == 1
    assert entry.response_product == 0.9
    moved = load_mask(tmp_path / entry.mask_path)
    expected = np.zeros((SIZE, SIZE), dtype=bool)
    expected[4:16, 8:20] = True  # the 4..16 square shifted right by 4
    np.testing.assert_array_equal(moved.bits, expected)


def test_corrected_drops_filtered_and_missing_chains(tmp_path):
    feeds = {"a": _feed("a", n=5)}
    chains = {"a": [
        _ok_chain("000001"),
        _ok_chain("000002", product=0.44),  # ok status but below threshold
        ChainResult(target_frame_id="000003", path=("000000", "000003"),
                    composed=SimilarityTransform.identity(),
                    product=0.3, status=STATUS_FILTERED),
        # 000004 has no chain result at all
    ]}
    manifest, report = emit_corrected(feeds, [_annotation("a")], chains,
                                      tmp_path, threshold=0.45)
    emitted = {e.frame_path.split("/")[-1].split(".")[0]
               for e in manifest.entries}
    assert emitted == {"000000", "000001"}
    text = "\n".join(report.lines)
    assert "filtered: below threshold (product=0.4400)" in text
    assert "filtered: filtered" in text
    assert "no chain result" in text
    # nothing was written for the dropped frames
    assert not (tmp_path / "a" / "000002.mask.png").exists()


def test_corrected_reports_unreachable(tmp_path):
    feeds = {"a": _feed("a", n=2)}
    chains = {"a": [ChainResult(target_frame_id="000001", path=(),
                                composed=None, product=0.0,
                                status=STATUS_UNREACHABLE)]}
    manifest, report = emit_corrected(feeds, [_annotation("a")], chains,
                                      tmp_path)
    assert len(manifest.entries) == 1  # just the reference
    assert any("unreachable" in line for line in report.lines)


def test_corrected_never_emits_more_than_reuse(tmp_path):
    feeds = {"a": _feed("a", n=4)}
    anns = [_annotation("a")]
    chains = {"a": [_ok_chain("000001"), _ok_chain("000003", product=0.2)]}
    corrected, _ = emit_corrected(feeds, anns, chains, tmp_path / "c")
    reuse, _ = emit_reuse(feeds, anns, tmp_path / "r")
    assert len(corrected.entries) <= len(reuse.entries)


# --- manifest and determinism ------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    entries = (
        ManifestEntry(frame_path="a/0.png", mask_path="a/0.mask.png",
                      camera_id="a", timestamp=0.0, mode=MODE_BASELINE,
                      chain_length=0, response_product=1.0),
        ManifestEntry(frame_path="a/1.png", mask_path="a/1.mask.png",
                      camera_id="a", timestamp=1200.0, mode=MODE_CORRECTED,
                      chain_length=3, response_product=0.625,
                      filtered_reason="below threshold"),
    )
    manifest = DatasetManifest(entries=entries)
    manifest.write(tmp_path / "manifest.ndjson")
    assert DatasetManifest.read(tmp_path / "manifest.ndjson") == manifest


def test_rerun_is_byte_identical(tmp_path):
    feeds = {"a": _feed("a", n=3), "b": _feed("b", n=2)}
    anns = [_annotation("a", exclusion_masks={"000001": square_mask(SIZE, 0, 8)}),
            _annotation("b")]
    chains = {"a": [_ok_chain("000001", tx=2.0, product=0.8),
                    _ok_chain("000002", product=0.3)],
              "b": [_ok_chain("000001", tx=-1.0, product=0.7)]}
    for run in ("run1", "run2"):
        emit_corrected(feeds, anns, chains, tmp_path / run)
    files1 = sorted(p.relative_to(tmp_path / "run1")
                    for p in (tmp_path / "run1").rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(tmp_path / "run2")
                    for p in (tmp_path / "run2").rglob("*") if p.is_file())
    assert files1 == files2 and files1
    for rel in files1:
        assert (tmp_path / "run1" / rel).read_bytes() == \
            (tmp_path / "run2" / rel).read_bytes()


# --- annotation sidecars --------------------------------------------------------


def test_load_annotations_round_trip(tmp_path):
    manual = square_mask(SIZE, 4, 16)
    excl = square_mask(SIZE, 0, 6, frame_id="000002")
    save_mask(manual, tmp_path / "cam1.mask.png")
    save_mask(excl, tmp_path / "cam1.excl.png")
    (tmp_path / "cam1.json").write_text(json.dumps({
        "reference_frame_id": "000000",
        "mask": "cam1.mask.png",
        "exclusions": {"000002": "cam1.excl.png"},
    }))
    anns = load_annotations(tmp_path)
    assert set(anns) == {"cam1"}
    ann = anns["cam1"]
    assert ann.reference_frame_id == "000000"
    assert ann.manual_mask.provenance == PROVENANCE_MANUAL
    np.testing.assert_array_equal(ann.manual_mask.bits, manual.bits)
    np.testing.assert_array_equal(ann.exclusion_masks["000002"].bits, excl.bits)


def test_load_annotations_rejects_malformed_sidecar(tmp_path):
    (tmp_path / "cam1.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_annotations(tmp_path)
    (tmp_path / "cam1.json").write_text(json.dumps({"mask": "m.png"}))
    with pytest.raises(ConfigError):
        load_annotations(tmp_path)


def test_load_annotations_rejects_unknown_keys(tmp_path):
    save_mask(square_mask(SIZE, 4, 16), tmp_path / "cam1.mask.png")
    (tmp_path / "cam1.json").write_text(json.dumps({
        "reference_frame_id": "000000",
        "mask": "cam1.mask.png",
        "referenc_frame_id": "000001",
    }))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_annotations(tmp_path)


def test_load_annotations_missing_directory(tmp_path):
    with pytest.raises(DataIOError):
        load_annotations(tmp_path / "nope")
