"""Synthetic studies with known ground truth.

Everything downstream is validated against data generated here: the latent
word stream, the per-voxel linear mapping, the noise level, and hence the
attainable correlation are all chosen by construction, so tests can compare
measured scores against closed-form targets instead of fixtures.

The "model family" mimics a family of nested feature spaces: the latent
stream has dimension D = family_dims[-1], and the member of size d exposes
the first d latent dimensions passed through a seeded orthogonal rotation.
Larger members therefore strictly dominate smaller ones informationally.
Left-hemisphere voxels load on all D dimensions (so their explainable
signal keeps growing with d) while right-hemisphere voxels load only on
the first family_dims[0] dimensions (so their score saturates immediately).
With left_gain="flat" both hemispheres use the saturating loading, which
removes the asymmetry and serves as the negative control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import build_design, glover_hrf
from .errors import InputError
from .matio import EventList, VoxelGeometry
from .preprocess import BoldRun

LEFT_GAIN_MODES = ("harmonic", "flat")


@dataclass
class SynthConfig:
    n_runs: int = 9
    n_scans: int = 300
    n_voxels: int = 200  # even: voxels come in mirrored left/right pairs
    tr: float = 2.0
    noise_sigma: float = 1.0
    family_dims: tuple[int, ...] = (8, 16, 32, 64, 128, 256)
    left_gain: str = "harmonic"
    seed: int = 0
    words_per_scan: int = 2
    oversampling: int = 16
    ar_rho: float = 0.0  # 0 = white noise; 0<rho<1 = stationary AR(1)

    def validate(self) -> None:
        if self.n_runs < 1 or self.n_scans < 4 or self.n_voxels < 2:
            raise InputError("n_runs, n_scans, n_voxels too small")
        if self.n_voxels % 2:
            raise InputError(f"n_voxels must be even for mirrored pairs, got {self.n_voxels}")
        if self.tr <= 0:
            raise InputError(f"tr must be positive, got {self.tr}")
        if self.noise_sigma < 0:
            raise InputError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        dims = list(self.family_dims)
        if not dims or any(d <= 0 for d in dims) or any(b <= a for a, b in zip(dims, dims[1:])):
            raise InputError(f"family_dims must be strictly increasing positive, got {dims}")
        if self.left_gain not in LEFT_GAIN_MODES:
            raise InputError(f"left_gain must be one of {LEFT_GAIN_MODES}, got {self.left_gain!r}")
        if not 0 <= self.ar_rho < 1:
            raise InputError(f"ar_rho must be in [0, 1), got {self.ar_rho}")
        if self.words_per_scan < 1:
            raise InputError("words_per_scan must be >= 1")


@dataclass
class SynthTruth:
    betas: np.ndarray  # (D, V) latent-to-voxel loadings
    ceiling: np.ndarray  # (V,) attainable r per voxel
    is_left: np.ndarray  # (V,) bool hemisphere assignment
    latent_dim: int


@dataclass
class SynthStudy:
    config: SynthConfig
    events: list[EventList]  # per run
    features: dict[int, list[np.ndarray]]  # model dim -> per-run (n_words, d)
    bold_runs: list[BoldRun]
    geometry: VoxelGeometry
    truth: SynthTruth
    latents: list[np.ndarray] = field(default_factory=list)  # per-run (n_words, D)


def theoretical_ceiling(signal_var: float, noise_var: float) -> float:
    """Best attainable Pearson r for a linear probe of signal in noise."""
    if signal_var < 0 or noise_var < 0:
        raise InputError("variances must be non-negative")
    if signal_var == 0 and noise_var == 0:
        raise InputError("signal and noise variance cannot both be zero")
    return float(np.sqrt(signal_var / (signal_var + noise_var)))


def _rotation(dim: int, seed: int) -> np.ndarray:
    """Seeded orthogonal matrix, deterministic per (seed, dim)."""
    rng = np.random.default_rng([seed, 11, dim])
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    # fix signs so the factorization is unique
    return q * np.sign(np.diag(r))


def _loadings(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-voxel latent loadings and hemisphere flags.

    Even voxel indices are left (x < 0), odd are right.  Each mirrored
    pair shares one base loading vector; the hemisphere envelopes are
    applied on top.  Sharing the base makes the left_gain="flat" control
    an exact distributional null for left-minus-right contrasts (the two
    hemispheres then carry identical clean signals), rather than a null
    only on average over voxel draws.

    The left envelope decays like 1/sqrt(j) ("harmonic") so each extra
    revealed dimension adds a diminishing but nonzero share of variance;
    the right envelope is flat over the first family_dims[0] dimensions
    and zero beyond, so right-hemisphere scores saturate immediately.
    """
    d_total = cfg.family_dims[-1]
    d_floor = cfg.family_dims[0]
    rng = np.random.default_rng([cfg.seed, 13])
    base = rng.standard_normal((d_total, cfg.n_voxels // 2))
    harmonic = 1.0 / np.sqrt(np.arange(1, d_total + 1))
    saturating = np.zeros(d_total)
    saturating[:d_floor] = 1.0
    is_left = (np.arange(cfg.n_voxels) % 2) == 0
    left_envelope = harmonic if cfg.left_gain == "harmonic" else saturating
    betas = np.zeros((d_total, cfg.n_voxels))
    betas[:, is_left] = base * left_envelope[:, None]
    betas[:, ~is_left] = base * saturating[:, None]
    return betas, is_left


def _geometry(n_voxels: int) -> VoxelGeometry:
    """Mirrored pairs on the x axis at +-4 mm steps, y and z zero."""
    coords = np.zeros((n_voxels, 3))
    pair = np.arange(n_voxels) // 2
    sign = np.where((np.arange(n_voxels) % 2) == 0, -1.0, 1.0)
    coords[:, 0] = sign * 4.0 * (pair + 1)
    return VoxelGeometry(coords=coords)


def _noise(rng: np.random.Generator, shape: tuple[int, int], rho: float) -> np.ndarray:
    eps = rng.standard_normal(shape)
    if rho == 0:
        return eps
    out = np.empty(shape)
    out[0] = eps[0]
    scale = np.sqrt(1.0 - rho**2)
    for t in range(1, shape[0]):
        out[t] = rho * out[t - 1] + scale * eps[t]
    return out


def gen_study(cfg: SynthConfig) -> SynthStudy:
    """Generate events, per-model features, BOLD, geometry, and the truth."""
    cfg.validate()
    d_total = cfg.family_dims[-1]
    betas, is_left = _loadings(cfg)
    geometry = _geometry(cfg.n_voxels)
    hrf = glover_hrf(cfg.tr, oversampling=cfg.oversampling)

    spacing = cfg.tr / cfg.words_per_scan
    n_words = cfg.n_scans * cfg.words_per_scan
    onsets = np.arange(n_words) * spacing
    words = [f"w{i:05d}" for i in range(n_words)]

    rotations = {d: _rotation(d, cfg.seed) for d in cfg.family_dims}
    events: list[EventList] = []
    latents: list[np.ndarray] = []
    features: dict[int, list[np.ndarray]] = {d: [] for d in cfg.family_dims}
    bold_runs: list[BoldRun] = []
    for k in range(cfg.n_runs):
        z = np.random.default_rng([cfg.seed, 7, k]).standard_normal((n_words, d_total))
        ev = EventList(words=list(words), onsets=onsets.copy())
        clean = build_design(z @ betas, ev, cfg.n_scans, cfg.tr, oversampling=cfg.oversampling, hrf=hrf)
        # unit signal variance per voxel so the ceiling formula is exact
        clean -= clean.mean(axis=0)
        sd = clean.std(axis=0)
        clean = np.divide(clean, sd, out=np.zeros_like(clean), where=sd > 0)
        noise = _noise(np.random.default_rng([cfg.seed, 17, k]), clean.shape, cfg.ar_rho)
        bold_runs.append(BoldRun(data=clean + cfg.noise_sigma * noise, tr=cfg.tr, run_id=k))
        events.append(ev)
        latents.append(z)
        for d in cfg.family_dims:
            features[d].append(z[:, :d] @ rotations[d])

    ceiling = np.full(cfg.n_voxels, theoretical_ceiling(1.0, cfg.noise_sigma**2))
    truth = SynthTruth(betas=betas, ceiling=ceiling, is_left=is_left, latent_dim=d_total)
    return SynthStudy(
        config=cfg,
        events=events,
        features=features,
        bold_runs=bold_runs,
        geometry=geometry,
        truth=truth,
        latents=latents,
    )


def study_designs(study: SynthStudy, dim: int) -> list[np.ndarray]:
    """Scan-space HRF designs for one family member, per run."""
    if dim not in study.features:
        raise InputError(f"dim {dim} not in family {sorted(study.features)}")
    cfg = study.config
    hrf = glover_hrf(cfg.tr, oversampling=cfg.oversampling)
    return [
        build_design(feats, ev, cfg.n_scans, cfg.tr, oversampling=cfg.oversampling, hrf=hrf)
        for feats, ev in zip(study.features[dim], study.events)
    ]


def gen_isc_cohort(
    n_subjects: int,
    shared_var: float,
    noise_var: float,
    n_scans: int,
    seed: int = 0,
    n_runs: int = 4,
    n_voxels: int = 12,
    tr: float = 2.0,
) -> list[list[BoldRun]]:
    """Per-subject run lists: one shared signal plus independent noise.

    Returns subjects[i][k], all aligned on the same runs.  Correlation of
    two group means over disjoint halves of the cohort has the closed form
    1/sqrt((1 + noise_var/(shared_var n_a))(1 + noise_var/(shared_var n_b)))
    when shared_var > 0, which the reliability tests use as oracle.
    """
    if n_subjects < 2:
        raise InputError(f"need at least 2 subjects, got {n_subjects}")
    if shared_var < 0 or noise_var < 0:
        raise InputError("variances must be non-negative")
    shared_sd = np.sqrt(shared_var)
    noise_sd = np.sqrt(noise_var)
    subjects: list[list[BoldRun]] = [[] for _ in range(n_subjects)]
    for k in range(n_runs):
        shared = shared_sd * np.random.default_rng([seed, 23, k]).standard_normal((n_scans, n_voxels))
        for i in range(n_subjects):
            noise = noise_sd * np.random.default_rng([seed, 29, k, i]).standard_normal((n_scans, n_voxels))
            subjects[i].append(BoldRun(data=shared + noise, tr=tr, run_id=k))
    return subjects
