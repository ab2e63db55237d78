"""Corpus data model, on-disk format, validation and a synthetic generator.

A dataset directory holds, per recording, ``<name>.wav`` (RIFF PCM, 44.1 kHz,
16-bit, mono) and ``<name>.json``::

    {"subject_id": "S01", "sample_rate_hz": 44100,
     "bouts": [{"subject_id": "S01", "food": "apple", "weight_g": 7.5,
                "chews": [[0.10, 0.21], [0.33, 0.45]]}, ...]}
"""
from __future__ import annotations

import dataclasses
import enum
import json
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

SAMPLE_RATE = 44100
BIT_DEPTH = 16
_PCM_SCALE = 32768.0


class DatasetError(ValueError):
    """Raised when files on disk do not form a valid corpus."""


class Food(str, enum.Enum):
    APPLE = "apple"
    BANANA = "banana"
    RICE = "rice"
    CHIPS = "chips"

    @classmethod
    def parse(cls, value):
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown food type {value!r}") from None

    @property
    def label(self):
        return self.value.capitalize()


FOODS = tuple(Food)


@dataclass(frozen=True)
class ChewAnnotation:
    start_s: float
    stop_s: float

    @property
    def duration_s(self):
        return self.stop_s - self.start_s


@dataclass(frozen=True)
class Bout:
    subject_id: str
    food: Food
    chews: tuple[ChewAnnotation, ...]
    weight_g: float

    @property
    def n_chews(self):
        return len(self.chews)

    @property
    def starts(self):
        return np.array([c.start_s for c in self.chews], dtype=np.float64)

    @property
    def stops(self):
        return np.array([c.stop_s for c in self.chews], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Recording:
    recording_id: str
    subject_id: str
    samples: np.ndarray
    bouts: tuple[Bout, ...]
    sample_rate_hz: int = SAMPLE_RATE
    bit_depth: int = BIT_DEPTH

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    def chew_samples(self, chew):
        """Audio of one chew; time-stamps are rounded to the nearest sample."""
        lo, hi = chew_slice(chew, self.sample_rate_hz)
        return self.samples[lo:hi]


def chew_slice(chew, fs):
    return int(round(chew.start_s * fs)), int(round(chew.stop_s * fs))


@dataclass(frozen=True)
class BoutRef:
    """A bout together with where it lives; ``key`` is stable across runs."""

    key: str
    recording: Recording
    index: int

    @property
    def bout(self):
        return self.recording.bouts[self.index]


@dataclass(frozen=True, eq=False)
class Dataset:
    recordings: tuple[Recording, ...]

    @property
    def subjects(self):
        return sorted({r.subject_id for r in self.recordings})

    def bout_refs(self):
        return [
            BoutRef(f"{rec.recording_id}#{i}", rec, i)
            for rec in self.recordings
            for i in range(len(rec.bouts))
        ]

    @property
    def n_bouts(self):
        return sum(len(r.bouts) for r in self.recordings)


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)

    def __bool__(self):
        return not self.issues

    def add(self, msg):
        self.issues.append(msg)

    def __str__(self):
        return "\n".join(self.issues) if self.issues else "ok"


def _check_bout(report, where, bout, duration):
    if not bout.weight_g > 0:
        report.add(f"{where}: non-positive weight ({bout.weight_g} g)")
    if not bout.chews:
        report.add(f"{where}: bout has no chews")
    prev_stop = None
    for c, chew in enumerate(bout.chews):
        if not chew.stop_s > chew.start_s:
            report.add(f"{where} chew {c}: chew interval inverted "
                       f"({chew.start_s} >= {chew.stop_s})")
        if chew.start_s < 0 or (duration is not None and chew.stop_s > duration):
            report.add(f"{where} chew {c}: chew interval outside audio "
                       f"[0, {duration}]")
        if prev_stop is not None and chew.start_s < prev_stop:
            report.add(f"{where} chew {c}: chews overlap or are unsorted")
        prev_stop = chew.stop_s


def validate(ds):
    """Collect every invariant violation in ``ds`` without stopping early."""
    report = ValidationReport()
    if len(ds.subjects) < 2:
        report.add("LOSO requires ≥ 2 subjects "
                   f"(found {len(ds.subjects)})")
    for rec in ds.recordings:
        if rec.sample_rate_hz != SAMPLE_RATE:
            report.add(f"{rec.recording_id}: sample rate {rec.sample_rate_hz} "
                       f"!= {SAMPLE_RATE}")
        for b, bout in enumerate(rec.bouts):
            where = f"{rec.recording_id} bout {b}"
            if bout.subject_id != rec.subject_id:
                report.add(f"{where}: subject {bout.subject_id!r} differs from "
                           f"recording subject {rec.subject_id!r}")
            _check_bout(report, where, bout, rec.duration_s)
    return report


# -- disk I/O ---------------------------------------------------------------

def read_wav(path):
    """Return mono samples in [-1, 1) as float32 plus the sample rate."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            fs = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise DatasetError(f"{path}: malformed WAV header ({exc})") from exc
    if width != BIT_DEPTH // 8:
        raise DatasetError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if fs != SAMPLE_RATE:
        raise DatasetError(f"{path}: expected {SAMPLE_RATE} Hz, got {fs} Hz")
    pcm = np.frombuffer(raw, dtype="<i2").reshape(-1, channels)
    if channels == 1:
        samples = pcm[:, 0].astype(np.float32) / np.float32(_PCM_SCALE)
    else:
        samples = (pcm.astype(np.float64).mean(axis=1) / _PCM_SCALE).astype(np.float32)
    return samples, fs


def write_wav(path, samples, fs=SAMPLE_RATE):
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * _PCM_SCALE),
                  -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(fs)
        wf.writeframes(pcm.tobytes())


def _bout_from_json(obj, path, index):
    try:
        chews = tuple(ChewAnnotation(float(a), float(b)) for a, b in obj["chews"])
        return Bout(
            subject_id=str(obj["subject_id"]),
            food=Food.parse(obj["food"]),
            chews=chews,
            weight_g=float(obj["weight_g"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path} bout {index}: malformed record ({exc})") from exc


def bout_to_json(bout):
    return {
        "subject_id": bout.subject_id,
        "food": bout.food.value,
        "weight_g": bout.weight_g,
        "chews": [[c.start_s, c.stop_s] for c in bout.chews],
    }


def load_recording(json_path):
    json_path = Path(json_path)
    wav_path = json_path.with_suffix(".wav")
    if not wav_path.exists():
        raise DatasetError(f"{json_path}: no matching audio file {wav_path.name}")
    try:
        meta = json.loads(json_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{json_path}: invalid JSON ({exc})") from exc
    samples, fs = read_wav(wav_path)
    bouts = tuple(_bout_from_json(b, json_path, i) for i, b in enumerate(meta.get("bouts", [])))
    subject = str(meta.get("subject_id", bouts[0].subject_id if bouts else ""))
    return Recording(json_path.stem, subject, samples, bouts, fs)


def load_dataset(root):
    """Load every ``*.json``/``*.wav`` pair under ``root`` and validate.

    Raises :class:`DatasetError` naming file and record index for any
    violated invariant (the LOSO subject-count check is left to
    :func:`validate`, so single-subject directories still load).
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    recs = tuple(load_recording(p) for p in sorted(root.glob("*.json")))
    if not recs:
        raise DatasetError(f"{root}: no annotation files found")
    ds = Dataset(recs)
    report = validate(ds)
    problems = [m for m in report.issues if not m.startswith("LOSO")]
    if problems:
        raise DatasetError("; ".join(f"{root}/{m}" for m in problems))
    return ds


def write_dataset(ds, root):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for rec in ds.recordings:
        write_wav(root / f"{rec.recording_id}.wav", rec.samples, rec.sample_rate_hz)
        meta = {
            "subject_id": rec.subject_id,
            "sample_rate_hz": rec.sample_rate_hz,
            "bouts": [bout_to_json(b) for b in rec.bouts],
        }
        (root / f"{rec.recording_id}.json").write_text(json.dumps(meta, indent=1) + "\n")


# -- synthetic corpora ------------------------------------------------------

@dataclass(frozen=True)
class FoodParams:
    weight_range_g: tuple[float, float]
    chews_per_gram: float
    chew_dur_mean_s: float
    chew_dur_std_s: float
    tilt: float  # one-pole coefficient; < 0 boosts highs (crispy), > 0 boosts lows
    energy_base: float  # per-sample energy at 0 g
    energy_per_gram: float
    noise_floor: float = 1e-3


DEFAULT_FOODS = {
    Food.APPLE: FoodParams((2.0, 20.0), 1.0, 0.10, 0.02, -0.5, 2e-3, 5e-4),
    Food.BANANA: FoodParams((2.0, 20.0), 0.8, 0.12, 0.02, 0.6, 1.5e-3, 4e-4),
    Food.RICE: FoodParams((2.0, 20.0), 1.0, 0.09, 0.02, 0.3, 1.5e-3, 4e-4),
    Food.CHIPS: FoodParams((0.5, 3.0), 3.0, 0.07, 0.015, -0.8, 2e-3, 3e-3),
}


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 8
    bouts_per_subject_per_food: int = 15
    seed: int = 0
    foods: dict = field(default_factory=lambda: dict(DEFAULT_FOODS))
    count_noise: int = 1  # chew count jitter is uniform in [-count_noise, count_noise]
    energy_jitter: float = 0.05  # lognormal sigma of per-chew energy
    inter_chew_gap_s: tuple[float, float] = (0.05, 0.12)
    bout_gap_s: float = 0.4
    fs: int = SAMPLE_RATE

    def __post_init__(self):
        if self.n_subjects < 1 or self.bouts_per_subject_per_food < 1:
            raise ValueError("SynthConfig counts must be >= 1")
        if not self.foods:
            raise ValueError("SynthConfig needs at least one food")
        for food, p in self.foods.items():
            lo, hi = p.weight_range_g
            if not 0 < lo <= hi:
                raise ValueError(f"{food.value}: weight range must be positive and ordered")
            if p.chew_dur_mean_s <= 0 or p.chew_dur_std_s < 0:
                raise ValueError(f"{food.value}: invalid chew duration parameters")

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        foods = dict(DEFAULT_FOODS)
        for name, params in obj.pop("foods", {}).items():
            food = Food.parse(name)
            base = dataclasses.asdict(foods[food])
            base.update(params)
            base["weight_range_g"] = tuple(base["weight_range_g"])
            foods[food] = FoodParams(**base)
        if "inter_chew_gap_s" in obj:
            obj["inter_chew_gap_s"] = tuple(obj["inter_chew_gap_s"])
        return cls(foods=foods, **obj)

    def to_json(self):
        out = dataclasses.asdict(self)
        out["foods"] = {f.value: dataclasses.asdict(p) for f, p in self.foods.items()}
        return out


def _chew_burst(rng, n, tilt, energy):
    x = rng.standard_normal(n) * np.hanning(n)
    x = lfilter([1.0], [1.0, -tilt], x)
    rms = np.sqrt(np.mean(x * x))
    return x * (np.sqrt(energy) / rms) if rms > 0 else x


def _synth_recording(cfg, rng, subject, food, rec_id):
    p = cfg.foods[food]
    fs = cfg.fs
    t = cfg.bout_gap_s
    bouts = []
    bursts = []
    for _ in range(cfg.bouts_per_subject_per_food):
        w = float(np.round(rng.uniform(*p.weight_range_g), 3))
        n = int(round(p.chews_per_gram * w)) + int(rng.integers(-cfg.count_noise, cfg.count_noise + 1))
        n = max(n, 1)
        chews = []
        for _ in range(n):
            dur = max(p.chew_dur_mean_s + p.chew_dur_std_s * rng.standard_normal(), 0.03)
            start = round(t, 4)
            stop = round(t + dur, 4)
            lo, hi = int(round(start * fs)), int(round(stop * fs))
            energy = (p.energy_base + p.energy_per_gram * w) * np.exp(
                cfg.energy_jitter * rng.standard_normal())
            bursts.append((lo, _chew_burst(rng, hi - lo, p.tilt, energy)))
            chews.append(ChewAnnotation(start, stop))
            t = stop + rng.uniform(*cfg.inter_chew_gap_s)
        bouts.append(Bout(subject, food, tuple(chews), w))
        t += cfg.bout_gap_s
    total = int(np.ceil((t + cfg.bout_gap_s) * fs))
    audio = p.noise_floor * rng.standard_normal(total)
    for lo, burst in bursts:
        audio[lo:lo + burst.size] += burst
    pcm = np.clip(np.round(audio * _PCM_SCALE), -32768, 32767)
    samples = (pcm / _PCM_SCALE).astype(np.float32)
    return Recording(rec_id, subject, samples, tuple(bouts), fs)


def synth_generate(cfg):
    """Deterministic synthetic corpus: one recording per (subject, food).

    Chew count grows linearly with weight, and chew bursts are Hann-windowed
    noise through a one-pole tilt filter scaled to a per-sample energy that is
    affine in weight.  Samples are quantised to 16 bits so that writing and
    reloading is exact.
    """
    root = np.random.SeedSequence(cfg.seed)
    foods = [f for f in FOODS if f in cfg.foods]
    children = root.spawn(cfg.n_subjects * len(foods))
    recs = []
    for s in range(cfg.n_subjects):
        subject = f"S{s + 1:02d}"
        for f, food in enumerate(foods):
            rng = np.random.default_rng(children[s * len(foods) + f])
            recs.append(_synth_recording(cfg, rng, subject, food, f"{subject}_{food.value}"))
    # same order as load_dataset, which lists files by name
    return Dataset(tuple(sorted(recs, key=lambda r: r.recording_id)))


def datasets_equal(a, b):
    if len(a.recordings) != len(b.recordings):
        return False
    for ra, rb in zip(a.recordings, b.recordings):
        if (ra.recording_id, ra.subject_id, ra.sample_rate_hz, ra.bouts) != (
                rb.recording_id, rb.subject_id, rb.sample_rate_hz, rb.bouts):
            return False
        if ra.samples.shape != rb.samples.shape or not np.array_equal(ra.samples, rb.samples):
            return False
    return True
