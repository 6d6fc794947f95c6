import numpy as np
import pytest

from morletnet.errors import DomainError, FormatError
from morletnet.imagery import (
    LabeledPatch,
    build_slice_dataset,
    load_patch,
    load_patch_manifest,
    slice_patch,
)
from morletnet.pgm import read_pgm, to_8bit, write_pgm


def _pgm(tmp_path, pixels, name="p.pgm", maxval=255):
    path = tmp_path / name
    write_pgm(path, np.asarray(pixels), maxval=maxval)
    return path


def test_pgm_round_trip(tmp_path, rng):
    px = rng.integers(0, 256, size=(7, 5))
    back, maxval = read_pgm(_pgm(tmp_path, px))
    assert maxval == 255
    np.testing.assert_array_equal(back, px)


def test_pgm_header_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 1\n255\n\x00\xff")
    px, _ = read_pgm(path)
    np.testing.assert_array_equal(px, [[0, 255]])


@pytest.mark.parametrize("value, expect", [(255, 1.0), (0, 0.0), (128, 128 / 255)])
def test_load_patch_scaling(tmp_path, value, expect):
    p = load_patch(_pgm(tmp_path, np.full((128, 128), value)), "wave")
    assert p.label == 1
    np.testing.assert_allclose(p.pixels, expect)
    assert p.pixels.shape == (128, 128)


def test_load_patch_errors(tmp_path):
    with pytest.raises(FormatError, match="width"):
        load_patch(_pgm(tmp_path, np.zeros((128, 64)), "w.pgm"), 0)
    with pytest.raises(FormatError, match="height"):
        load_patch(_pgm(tmp_path, np.zeros((64, 128)), "h.pgm"), 0)
    with pytest.raises(FormatError, match="maxval"):
        load_patch(_pgm(tmp_path, np.zeros((128, 128)), "m.pgm", maxval=1000), 0)
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2\n128 128\n255\n")
    with pytest.raises(FormatError, match="magic"):
        load_patch(bad, 0)
    with pytest.raises(FormatError, match="label"):
        load_patch(_pgm(tmp_path, np.zeros((128, 128))), "fog")


def test_slice_patch_layout(rng):
    px = rng.uniform(size=(128, 128))
    signals, labels, manifest = slice_patch(LabeledPatch(px, 1, "x"))
    assert signals.shape == (256, 128)
    assert np.all(labels == 1)
    np.testing.assert_array_equal(signals[:128], px)
    np.testing.assert_array_equal(signals[128:].T, px)
    assert manifest[0] == {"patch": "x", "orientation": "h", "index": 0}
    assert manifest[255] == {"patch": "x", "orientation": "v", "index": 127}


def test_slice_constant_patch():
    signals, _, _ = slice_patch(LabeledPatch(np.full((128, 128), 0.25), 0))
    assert signals.shape == (256, 128)
    assert np.all(signals == 0.25)


def test_gw_training_shape():
    patch = LabeledPatch(np.zeros((128, 128)), 1)
    n = len(slice_patch(patch)[0])
    assert 646 * n == 165376


def _patches(rng, n_wave, n_cloud):
    return ([LabeledPatch(rng.uniform(size=(128, 128)), 1, f"w{i}") for i in range(n_wave)]
            + [LabeledPatch(rng.uniform(size=(128, 128)), 0, f"c{i}") for i in range(n_cloud)])


def test_truncation_balances(rng):
    ds = build_slice_dataset(_patches(rng, 3, 2), np.random.default_rng(0))
    assert np.sum(ds.labels == 1) == np.sum(ds.labels == 0) == 512
    assert ds.signals.shape == (1024, 1, 128)
    keys = {(m["patch"], m["orientation"], m["index"]) for m in ds.manifest}
    assert len(keys) == len(ds.manifest) == len(ds)


def test_equal_counts_keep_everything(rng):
    ds = build_slice_dataset(_patches(rng, 2, 2), np.random.default_rng(0))
    assert len(ds) == 4 * 256


def test_manifest_matches_slices(rng):
    patches = _patches(rng, 2, 1)
    by_id = {p.source_id: p.pixels for p in patches}
    ds = build_slice_dataset(patches, np.random.default_rng(1))
    for sig, m in zip(ds.signals[:, 0], ds.manifest):
        px = by_id[m["patch"]]
        ref = px[m["index"]] if m["orientation"] == "h" else px[:, m["index"]]
        np.testing.assert_array_equal(sig, ref)


def test_shuffle_determinism(rng):
    patches = _patches(rng, 2, 3)
    a = build_slice_dataset(patches, np.random.default_rng(9))
    b = build_slice_dataset(patches, np.random.default_rng(9))
    np.testing.assert_array_equal(a.signals, b.signals)
    assert a.manifest == b.manifest


def test_missing_class(rng):
    with pytest.raises(DomainError):
        build_slice_dataset(_patches(rng, 2, 0), np.random.default_rng(0))


def test_manifest_loading(tmp_path, rng):
    _pgm(tmp_path, to_8bit(rng.uniform(size=(128, 128))), "a.pgm")
    _pgm(tmp_path, np.zeros((128, 128)), "b.pgm")
    (tmp_path / "m.json").write_text(
        '[{"path": "a.pgm", "label": "wave"}, {"path": "b.pgm", "label": "cloud", "split": "test"}]')
    splits = load_patch_manifest(tmp_path / "m.json")
    assert [p.label for p in splits["train"]] == [1]
    assert [p.label for p in splits["test"]] == [0]
