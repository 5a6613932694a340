"""Scan-aligned regressors from per-word feature vectors.

Each feature dimension becomes an impulse train on an oversampled time grid
(one impulse per word, weighted by the word's feature value), is convolved
with the canonical double-gamma hemodynamic response, and is read out at
scan times.  Words are treated as duration-0 events; only onsets matter.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma

from . import kernels
from .errors import InputError
from .matio import EventList

# double-gamma response: peak at 6 s, undershoot at 12 s, both with
# dispersion 0.9, undershoot ratio 0.35; amplitude normalized to peak 1
PEAK_DELAY = 6.0
UNDERSHOOT_DELAY = 12.0
DISPERSION = 0.9
UNDERSHOOT_RATIO = 0.35
DEFAULT_OVERSAMPLING = 16
DEFAULT_TIME_LENGTH = 32.0


@dataclass
class HrfKernel:
    samples: np.ndarray  # values at spacing tr / oversampling
    tr: float
    oversampling: int
    time_length: float

    @property
    def dt(self) -> float:
        return self.tr / self.oversampling


def glover_hrf(
    tr: float,
    oversampling: int = DEFAULT_OVERSAMPLING,
    time_length: float = DEFAULT_TIME_LENGTH,
) -> HrfKernel:
    """Sample the double-gamma response on [0, time_length) at tr/oversampling."""
    if tr <= 0:
        raise InputError(f"tr must be positive, got {tr}")
    if oversampling < 1:
        raise InputError(f"oversampling must be >= 1, got {oversampling}")
    dt = tr / oversampling
    t = np.arange(0.0, time_length - dt / 2, dt)
    peak = gamma.pdf(t, PEAK_DELAY / DISPERSION, scale=DISPERSION)
    undershoot = gamma.pdf(t, UNDERSHOOT_DELAY / DISPERSION, scale=DISPERSION)
    h = peak - UNDERSHOOT_RATIO * undershoot
    h /= h.max()
    return HrfKernel(samples=h, tr=tr, oversampling=oversampling, time_length=time_length)


def convolve_causal(signal: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """y[n] = sum_k kernel[k] * signal[n-k], truncated to len(signal)."""
    signal = np.asarray(signal, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if signal.ndim == 1:
        return kernels.causal_convolve_columns(signal[:, None], kernel)[:, 0]
    return kernels.causal_convolve_columns(signal, kernel)


def onset_bins(onsets: np.ndarray, dt: float) -> np.ndarray:
    """Snap onsets to oversampled bins, rounding half away from zero."""
    return np.floor(np.asarray(onsets) / dt + 0.5).astype(np.int64)


def build_design(
    features: np.ndarray,
    events: EventList,
    n_scans: int,
    tr: float,
    oversampling: int = DEFAULT_OVERSAMPLING,
    hrf: HrfKernel | None = None,
) -> np.ndarray:
    """Convolve word features with the HRF and sample at scan times.

    features is (n_words, d) and must match the event list row for row.
    Returns (n_scans, d).  Columns are left unscaled; the encoder
    standardizes them with training-fold statistics.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise InputError(f"features must be 2-D (words x dims), got ndim={features.ndim}")
    if features.shape[0] != len(events):
        raise InputError(
            f"feature rows ({features.shape[0]}) != event count ({len(events)})"
        )
    if hrf is None:
        hrf = glover_hrf(tr, oversampling)
    elif hrf.tr != tr or hrf.oversampling != oversampling:
        raise InputError("hrf kernel was sampled with different tr/oversampling")
    duration = n_scans * tr
    if len(events):
        if events.onsets[0] < 0:
            raise InputError(f"negative onset {events.onsets[0]}s")
        if events.onsets[-1] >= duration:
            raise InputError(
                f"onset {events.onsets[-1]}s is outside the run (duration {duration}s)"
            )
    n_bins = n_scans * oversampling
    bins = onset_bins(events.onsets, hrf.dt)
    bins = np.minimum(bins, n_bins - 1)  # snap of a last-moment onset stays in range
    train = kernels.accumulate_impulses(bins, features, n_bins)
    convolved = kernels.causal_convolve_columns(train, hrf.samples)
    return convolved[::oversampling]


def trim_design(design: np.ndarray, trim_scans: int) -> np.ndarray:
    """Drop trim_scans rows at each end, mirroring BOLD trimming."""
    if trim_scans == 0:
        return design
    if design.shape[0] <= 2 * trim_scans:
        raise InputError(f"cannot trim {trim_scans} scans from each end of {design.shape[0]}")
    return design[trim_scans:-trim_scans]


def _word_seed(word: str) -> int:
    return int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")


def random_features(
    events: EventList,
    dim: int,
    mode: str = "iid",
    seed: int = 0,
) -> np.ndarray:
    """Random baseline features aligned with the word onsets.

    mode "iid" draws a fresh standard-normal vector for every token; mode
    "per_word" gives every distinct word string one fixed vector, reused at
    each occurrence (and across runs, since it depends only on seed + word).
    """
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    if mode == "iid":
        rng = np.random.default_rng(seed)
        return rng.standard_normal((len(events), dim))
    if mode == "per_word":
        cache: dict[str, np.ndarray] = {}
        rows = np.empty((len(events), dim))
        for i, word in enumerate(events.words):
            vec = cache.get(word)
            if vec is None:
                vec = np.random.default_rng([seed, _word_seed(word)]).standard_normal(dim)
                cache[word] = vec
            rows[i] = vec
        return rows
    raise InputError(f"mode must be 'iid' or 'per_word', got {mode!r}")
