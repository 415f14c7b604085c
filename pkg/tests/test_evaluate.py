from dataclasses import replace

import numpy as np
import pytest

from synth import TONES_HZ, command_clip

from lognet_kws.audio import AudioClip, write_wav
from lognet_kws.evalkit.dataset import build_index
from lognet_kws.evalkit.evaluate import (EmptySplitError, ExtractionError, FeatureSet,
                                         evaluate_pipeline, extract_features, split_features)
from lognet_kws.lognet import LogNetArch
from lognet_kws.pipeline import SpeechFrontEnd, clip_features


def test_tone_dataset_perfect_accuracy(tone_root):
    idx = build_index(tone_root, "speaker-independent")
    res = evaluate_pipeline(idx, "adaptive", LogNetArch(64, 50, 40), seed=1)
    assert res.report.accuracy == 1.0
    assert res.report.n_samples == len(idx.test) == 8
    assert res.report.extra["arch"] == "64:50:40:4"
    assert res.report.fallback_count == 0
    assert not set(res.train.speakers) & set(res.test.speakers)


def test_same_seed_same_report(tone_root):
    idx = build_index(tone_root, "random", seed=3)
    a = evaluate_pipeline(idx, "basic", LogNetArch(32, 10, 8), seed=3, epochs=20)
    b = evaluate_pipeline(idx, "basic", LogNetArch(32, 10, 8), seed=3, epochs=20)
    assert a.report.to_json() == b.report.to_json()
    assert a.classifier.model_.readout.hidden.tobytes() == b.classifier.model_.readout.hidden.tobytes()


def test_arch_dimension_mismatch(tone_root):
    idx = build_index(tone_root, "si")
    with pytest.raises(ValueError, match="expects N=32"):
        evaluate_pipeline(idx, "adaptive", LogNetArch(32, 5, 5), epochs=1)


def test_empty_test_split(tmp_path):
    for lab, f in TONES_HZ.items():
        (tmp_path / lab).mkdir()
        write_wav(tmp_path / lab / f"spkx_nohash_{lab}.wav", command_clip(f))
    idx = build_index(tmp_path, "random", seed=0)
    idx = replace(idx, entries=tuple(replace(e, split="train") for e in idx.entries))
    with pytest.raises(EmptySplitError, match="empty split"):
        evaluate_pipeline(idx, epochs=1)


def test_cache_roundtrip(tone_root, tmp_path):
    idx = build_index(tone_root, "si")
    first = extract_features(idx.entries, ["adaptive", "windowed"], cache_dir=tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert len(files) == 2 and all(f.startswith("features-") for f in files)
    again = extract_features(idx.entries, ["adaptive", "windowed"], cache_dir=tmp_path)
    for m in first:
        assert np.array_equal(first[m].X, again[m].X)
        assert list(first[m].paths) == list(again[m].paths)
    assert first["windowed_stats"].X.shape == (20, 128)


def test_parallel_matches_serial(tone_root):
    idx = build_index(tone_root, "si")
    a = extract_features(idx.entries[:6], ["adaptive"], n_jobs=1)["adaptive_binning"]
    b = extract_features(idx.entries[:6], ["adaptive"], n_jobs=2)["adaptive_binning"]
    assert np.array_equal(a.X, b.X)


def test_feature_set_io(tmp_path):
    fs = FeatureSet(np.arange(6.0).reshape(3, 2), np.array(["go", "left", "go"]),
                    np.array(["a", "b", "c"]), np.array(["p1", "p2", "p3"]),
                    np.array([False, True, False]), "basic_stats")
    fs.save(tmp_path / "f.npz")
    back = FeatureSet.load(tmp_path / "f.npz")
    assert np.array_equal(back.X, fs.X) and back.fallback_count == 1 and back.method == "basic_stats"
    assert len(fs.take([0, 2])) == 2


def test_corrupt_file_reports_path(tmp_path):
    for lab in TONES_HZ:
        (tmp_path / lab).mkdir()
        (tmp_path / lab / "spk_nohash_0.wav").write_bytes(b"not a wav")
    idx = build_index(tmp_path, "random")
    with pytest.raises(ExtractionError, match="spk_nohash_0.wav"):
        extract_features(idx.entries)


def test_vad_fallback_counted():
    quiet = AudioClip(np.zeros(16000), 16000)
    cf = clip_features(quiet, ["adaptive"])
    assert cf.fallback and cf.segment is None and cf.vectors["adaptive_binning"].shape == (64,)
    loud = command_clip(900.0)
    cf = clip_features(loud, ["adaptive"])
    assert not cf.fallback and cf.segment is not None


def test_split_features_order(tone_root):
    idx = build_index(tone_root, "si")
    fs = extract_features(idx.entries, ["basic"])["basic_stats"]
    tr, te = split_features(idx, fs)
    assert list(tr.paths) == [e.path for e in idx.train]
    assert list(te.paths) == [e.path for e in idx.test]


def test_front_end_transformer(tone_root):
    paths = sorted(str(p) for p in tone_root.glob("go/*.wav"))[:2]
    fe = SpeechFrontEnd("temporal").fit(paths)
    X = fe.transform(paths)
    assert X.shape == (2, 48) and fe.fallback_mask_.tolist() == [False, False]
