import json
import wave

import numpy as np
import pytest

from biteweight.dataset import (Bout, ChewAnnotation, Dataset, DatasetError, Food, Recording, SynthConfig,
                                datasets_equal, load_dataset, read_wav, synth_generate, validate,
                                write_dataset, write_wav)


def _rec(subject, chews, weight=5.0, n=44100, rid=None):
    bout = Bout(subject, Food.APPLE, tuple(ChewAnnotation(a, b) for a, b in chews), weight)
    return Recording(rid or f"{subject}_apple", subject, np.zeros(n, np.float32), (bout,))


def _write_fixture(root, records):
    """records: {rec_id: (subject, bouts-json)}; audio is 1 s of silence."""
    root.mkdir(exist_ok=True)
    for rid, (subject, bouts) in records.items():
        write_wav(root / f"{rid}.wav", np.zeros(44100))
        (root / f"{rid}.json").write_text(json.dumps({"subject_id": subject, "bouts": bouts}))
    return root


def _bout(subject, chews, weight=5.0):
    return {"subject_id": subject, "food": "apple", "weight_g": weight, "chews": chews}


def test_fixture_loads(tmp_path):
    root = _write_fixture(tmp_path / "d", {
        "a": ("S1", [_bout("S1", [[0.1, 0.2], [0.3, 0.4]])]),
        "b": ("S2", [_bout("S2", [[0.1, 0.2]])]),
    })
    ds = load_dataset(root)
    assert ds.subjects == ["S1", "S2"]
    assert ds.n_bouts == 2
    assert ds.recordings[0].bouts[0].chews[1] == ChewAnnotation(0.3, 0.4)


@pytest.mark.parametrize("chews,weight,message", [
    ([[0.5, 0.2]], 5.0, "chew interval inverted"),
    ([[0.1, 0.2]], 0.0, "non-positive weight"),
    ([[0.1, 0.3], [0.2, 0.4]], 5.0, "chews overlap"),
    ([[0.1, 2.0]], 5.0, "chew interval outside audio"),
])
def test_load_errors(tmp_path, chews, weight, message):
    root = _write_fixture(tmp_path / "d", {
        "a": ("S1", [_bout("S1", [[0.1, 0.2]])]),
        "b": ("S2", [_bout("S2", [[0.1, 0.2]]), _bout("S2", chews, weight)]),
    })
    with pytest.raises(DatasetError, match=message) as exc:
        load_dataset(root)
    assert "b bout 1" in str(exc.value)


def test_malformed_wav(tmp_path):
    root = _write_fixture(tmp_path / "d", {"a": ("S1", [_bout("S1", [[0.1, 0.2]])])})
    (root / "a.wav").write_bytes(b"RIFFjunk")
    with pytest.raises(DatasetError, match="malformed WAV header"):
        load_dataset(root)


def test_missing_wav(tmp_path):
    root = tmp_path / "d"
    root.mkdir()
    (root / "a.json").write_text(json.dumps({"subject_id": "S1", "bouts": []}))
    with pytest.raises(DatasetError, match="a.wav"):
        load_dataset(root)


def test_stereo_downmix(tmp_path):
    left = np.array([1000, -2000, 3000], dtype="<i2")
    right = np.array([3000, 2000, -1000], dtype="<i2")
    with wave.open(str(tmp_path / "s.wav"), "wb") as wf:
        wf.setnchannels(2)
        wf.setsampwidth(2)
        wf.setframerate(44100)
        wf.writeframes(np.column_stack([left, right]).tobytes())
    x, fs = read_wav(tmp_path / "s.wav")
    assert fs == 44100
    np.testing.assert_allclose(x, np.array([2000, 0, 1000]) / 32768.0, atol=1e-7)


def test_wrong_sample_rate(tmp_path):
    write_wav(tmp_path / "x.wav", np.zeros(100), fs=16000)
    with pytest.raises(DatasetError, match="44100"):
        read_wav(tmp_path / "x.wav")


def test_validate_clean(small_ds):
    assert not validate(small_ds).issues


def test_validate_single_subject():
    report = validate(Dataset((_rec("S1", [(0.1, 0.2)]),)))
    assert any("LOSO requires ≥ 2 subjects" in m for m in report.issues)


def test_validate_reports_all_issues():
    bad = Bout("S2", Food.APPLE, (ChewAnnotation(0.1, 0.3), ChewAnnotation(0.2, 0.4)), -1.0)
    rec = Recording("S2_apple", "S2", np.zeros(44100, np.float32), (bad, bad))
    report = validate(Dataset((_rec("S1", [(0.1, 0.2)]), rec)))
    overlap = [m for m in report.issues if "overlap" in m]
    assert [m.split(" chew")[0] for m in overlap] == ["S2_apple bout 0", "S2_apple bout 1"]
    assert sum("non-positive weight" in m for m in report.issues) == 2


def test_synth_deterministic():
    cfg = SynthConfig(n_subjects=2, bouts_per_subject_per_food=3, seed=42)
    a, b = synth_generate(cfg), synth_generate(cfg)
    assert datasets_equal(a, b)
    c = synth_generate(SynthConfig(n_subjects=2, bouts_per_subject_per_food=3, seed=43))
    assert not datasets_equal(a, c)


def test_synth_counts():
    ds = synth_generate(SynthConfig(n_subjects=8, bouts_per_subject_per_food=15))
    assert ds.n_bouts == 480
    assert len(ds.subjects) == 8
    assert not validate(ds).issues


def test_synth_weight_chew_correlation():
    ds = synth_generate(SynthConfig(n_subjects=5, bouts_per_subject_per_food=25, seed=7))
    assert ds.n_bouts == 500
    w = np.array([r.bout.weight_g for r in ds.bout_refs()])
    n = np.array([r.bout.n_chews for r in ds.bout_refs()])
    assert np.corrcoef(w, n)[0, 1] > 0.8


def test_synth_energy_grows_with_weight():
    ds = synth_generate(SynthConfig(n_subjects=2, bouts_per_subject_per_food=20, seed=3))
    rec = ds.recordings[0]
    w = np.array([b.weight_g for b in rec.bouts])
    e = np.array([np.mean(np.concatenate([rec.chew_samples(c) for c in b.chews]).astype(float) ** 2)
                  for b in rec.bouts])
    assert np.corrcoef(w, e)[0, 1] > 0.8


def test_disk_round_trip(tmp_path, small_ds):
    write_dataset(small_ds, tmp_path / "d")
    assert datasets_equal(load_dataset(tmp_path / "d"), small_ds)


def test_synth_config_json_round_trip():
    cfg = SynthConfig(n_subjects=3, seed=9, count_noise=2)
    again = SynthConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg


@pytest.mark.parametrize("kw", [{"n_subjects": 0}, {"bouts_per_subject_per_food": 0}])
def test_synth_config_rejects_bad_counts(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_synth_config_rejects_bad_weight_range():
    with pytest.raises(ValueError, match="weight range"):
        SynthConfig.from_json({"foods": {"apple": {"weight_range_g": [-1, 2]}}})
