"""Per-chew audio descriptors and training-set standardisation.

Descriptor layout (13 values)::

    0..8   ln per-sample energy in octave bands 20-40, 40-80, ..., 5120-10240 Hz
    9      skewness of the time-domain samples
    10     kurtosis (non-excess)
    11     Katz fractal dimension
    12     ln per-sample broadband energy

Every energy is divided by the chew's sample count, so chews of different
length give comparable values.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataset import SAMPLE_RATE

BAND_EDGES_HZ = 20.0 * 2.0 ** np.arange(10)
N_BANDS = BAND_EDGES_HZ.size - 1
DESCRIPTOR_NAMES = tuple(
    [f"band_{int(lo)}_{int(hi)}" for lo, hi in zip(BAND_EDGES_HZ[:-1], BAND_EDGES_HZ[1:])]
    + ["skewness", "kurtosis", "katz_fd", "log_total_energy"]
)
DIM = len(DESCRIPTOR_NAMES)
MIN_CHEW_SAMPLES = 16
# floor added to band energies, relative to the chew's broadband energy
REL_ENERGY_FLOOR = 1e-12
ZERO_SIGNAL_LOG = float(np.log(1e-12))


class ChewTooShort(ValueError):
    pass


def band_energies(x, fs=SAMPLE_RATE):
    """Per-sample energy in each octave band, from an unpadded rectangular DFT.

    With the DFT length equal to the chew length the band sums satisfy
    Parseval exactly, and repeating the chew maps every bin onto a bin at the
    same frequency, so the values do not depend on how long the chew is.
    """
    n = x.size
    spectrum = np.fft.rfft(x)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    # one-sided spectrum: double every bin that has a negative-frequency twin
    power[1:(n + 1) // 2] *= 2.0
    freqs = np.arange(power.size) * (fs / n)
    band = np.searchsorted(BAND_EDGES_HZ, freqs, side="right") - 1
    inside = (band >= 0) & (band < N_BANDS)
    energy = np.bincount(band[inside], weights=power[inside], minlength=N_BANDS)
    return energy / (n * n)


def moments(x):
    """Sample skewness and kurtosis; both 0 for a constant signal."""
    mu = x.mean()
    dev = x - mu
    m2 = np.mean(dev * dev)
    if m2 <= 1e-20 * np.mean(x * x) or m2 == 0.0:
        return 0.0, 0.0
    m3 = np.mean(dev ** 3)
    m4 = np.mean(dev ** 4)
    return float(m3 / m2 ** 1.5), float(m4 / (m2 * m2))


def extract_chew_descriptor(samples, fs=SAMPLE_RATE):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_CHEW_SAMPLES:
        raise ChewTooShort(f"chew too short ({x.size} samples, need {MIN_CHEW_SAMPLES})")
    if fs != SAMPLE_RATE:
        raise ValueError(f"expected fs={SAMPLE_RATE}, got {fs}")
    total = float(np.mean(x * x))
    out = np.empty(DIM)
    if total > 0.0:
        out[:N_BANDS] = np.log(band_energies(x, fs) + REL_ENERGY_FLOOR * total)
        out[12] = np.log(total)
    else:
        out[:N_BANDS] = ZERO_SIGNAL_LOG
        out[12] = ZERO_SIGNAL_LOG
    out[9], out[10] = moments(x)
    out[11] = kernels.katz_fd(x)
    return out


def recording_descriptors(rec):
    """Descriptor matrix for every chew of every bout in ``rec``, bout by bout."""
    return [
        np.vstack([extract_chew_descriptor(rec.chew_samples(c), rec.sample_rate_hz)
                   for c in bout.chews])
        for bout in rec.bouts
    ]


def dataset_descriptors(ds):
    """Map bout key -> (n_chews, 13) descriptor matrix."""
    out = {}
    for rec in ds.recordings:
        for i, desc in enumerate(recording_descriptors(rec)):
            out[f"{rec.recording_id}#{i}"] = desc
    return out


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.mean.size:
            raise ValueError(f"dimension mismatch: got {x.shape[-1]}, expected {self.mean.size}")
        return (x - self.mean) / self.std

    def to_json(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["mean"], dtype=np.float64), np.asarray(obj["std"], dtype=np.float64))

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))


def fit_standardizer(rows, min_std=1e-12):
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot fit a standardizer on empty input")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows to estimate a standard deviation")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    std = np.where(std < min_std, 1.0, std)
    return Standardizer(mean, std)


def apply_standardizer(s, x):
    return s.apply(x)


def write_descriptor_csv(path, ds, descriptors=None):
    """One row per chew: subject, recording, bout index, chew index, 13 features."""
    descriptors = descriptors if descriptors is not None else dataset_descriptors(ds)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "recording_id", "bout", "chew", *DESCRIPTOR_NAMES])
        for rec in ds.recordings:
            for b in range(len(rec.bouts)):
                for c, row in enumerate(descriptors[f"{rec.recording_id}#{b}"]):
                    w.writerow([rec.subject_id, rec.recording_id, b, c, *(repr(float(v)) for v in row)])
