"""Multi-target ridge regression with run-level nested cross-validation.

The expensive object is the SVD of each training design.  It is computed
once per training set and reused for every penalty in the grid and every
voxel: with X = U S V', the ridge solution for penalty a is
V diag(s / (s^2 + a)) U' Y, so sweeping the grid costs one spectral filter
per penalty instead of one linear solve.

Scoring follows the run-level protocol: each run in turn is held out as
test, one of the remaining runs validates the penalty (chosen to maximize
validation correlation averaged over the analysis mask), the rest train.
Per voxel, correlations are averaged over test runs and the final map takes
the best layer.
"""

from __future__ import annotations

import hashlib
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InputError, NumericError
from .matio import Mask
from .preprocess import BoldRun

ALPHA_MIN = 1e2
ALPHA_MAX = 1e7
ALPHA_COUNT = 16


def make_alpha_grid(lo: float = ALPHA_MIN, hi: float = ALPHA_MAX, count: int = ALPHA_COUNT) -> np.ndarray:
    """Log-spaced penalty grid, strictly increasing and positive."""
    if lo <= 0 or hi <= lo or count < 1:
        raise InputError(f"invalid alpha grid ({lo}, {hi}, {count})")
    return np.logspace(np.log10(lo), np.log10(hi), count)


@dataclass
class RidgeFactorization:
    """SVD of a standardized training design plus the statistics to reapply it.

    Target-side state (y_mean, uty) is attached per use so a factorization
    can be cached and shared across target sets.
    """

    u: np.ndarray  # (n, r)
    s: np.ndarray  # (r,)
    vt: np.ndarray  # (r, d)
    col_mean: np.ndarray  # (d,)
    col_scale: np.ndarray  # (d,)
    y_mean: np.ndarray | None = None  # (v,)
    uty: np.ndarray | None = None  # (r, v) U' (Y - y_mean)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.col_mean) / self.col_scale

    def attach_targets(self, y_train: np.ndarray) -> None:
        self.y_mean = y_train.mean(axis=0)
        self.uty = self.u.T @ (y_train - self.y_mean)


def factorize(x_train: np.ndarray) -> RidgeFactorization:
    """Standardize columns with the training statistics and take the SVD."""
    if not np.isfinite(x_train).all():
        raise InputError("non-finite values in design matrix")
    mean = x_train.mean(axis=0)
    sd = x_train.std(axis=0)
    # constant columns get scale 1 and are zeroed outright; without the
    # exact constancy check an eps-sized centering residue divided by an
    # eps-sized sd would turn them into O(1) junk regressors
    live = (sd > 0) & (x_train != x_train[0]).any(axis=0)
    scale = np.where(live, sd, 1.0)
    xs = (x_train - mean) / scale
    xs[:, ~live] = 0.0
    u, s, vt = np.linalg.svd(xs, full_matrices=False)
    return RidgeFactorization(u=u, s=s, vt=vt, col_mean=mean, col_scale=scale)


def ridge_fit(x: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """Ridge coefficients argmin ||Xb - Y||^2 + alpha ||b||^2 via the SVD path.

    Operates on the matrices as given (centering/scaling is the caller's
    concern).  alpha = 0 falls back to the pseudoinverse solution.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InputError("non-finite values in ridge inputs")
    if alpha < 0:
        raise InputError(f"alpha must be >= 0, got {alpha}")
    single_target = y.ndim == 1
    if single_target:
        y = y[:, None]
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    if alpha == 0:
        cutoff = s.max() * 1e-12 if s.size else 0.0
        filt = np.divide(1.0, s, out=np.zeros_like(s), where=s > cutoff)
    else:
        filt = s / (s**2 + alpha)
    beta = vt.T @ (filt[:, None] * (u.T @ y))
    return beta[:, 0] if single_target else beta


def spectral_sweep(
    fact: RidgeFactorization,
    uty: np.ndarray,
    x_new_rotated: np.ndarray,
    alphas: np.ndarray,
) -> np.ndarray:
    """Predictions of centered targets for every alpha in one pass.

    uty is U' Yc (r, v); x_new_rotated is X_new_std V (m, r).  Returns an
    (n_alphas, m, v) array.
    """
    out = np.empty((len(alphas), x_new_rotated.shape[0], uty.shape[1]))
    for i, alpha in enumerate(alphas):
        filt = fact.s / (fact.s**2 + alpha)
        out[i] = (x_new_rotated * filt) @ uty
    return out


def pearson_per_voxel(
    y: np.ndarray, yhat: np.ndarray, return_defined: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Column-wise Pearson r; zero-variance columns score 0 and are flagged."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise InputError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    if y.shape[0] < 3:
        raise InputError(f"need at least 3 rows for a correlation, got {y.shape[0]}")
    r, defined = kernels.pearson_columns(y, yhat)
    return (r, defined) if return_defined else r


def score_single_split(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    y_test: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """Per-voxel r on one train/test split at a fixed penalty.

    Columns of X are standardized and Y centered with training statistics,
    exactly as inside the nested loop.
    """
    fact = factorize(np.asarray(x_train, dtype=float))
    y_train = np.asarray(y_train, dtype=float)
    if y_train.ndim == 1:
        y_train = y_train[:, None]
    y_test = np.asarray(y_test, dtype=float)
    if y_test.ndim == 1:
        y_test = y_test[:, None]
    fact.attach_targets(y_train)
    rot = fact.transform(np.asarray(x_test, dtype=float)) @ fact.vt.T
    pred = spectral_sweep(fact, fact.uty, rot, np.asarray([alpha]))[0] + fact.y_mean
    return pearson_per_voxel(y_test, pred)


@dataclass
class ScoreMap:
    """Per-voxel brain correlation plus the sub-maps it was reduced from."""

    values: np.ndarray  # (V,) mean over runs of best layer per voxel
    per_layer: np.ndarray  # (L, V) run-averaged r per layer
    per_run: np.ndarray  # (L, R, V) r per layer per held-out run
    chosen_alphas: np.ndarray  # (L, R) penalty picked in each outer fold
    best_layer: np.ndarray  # (V,) argmax layer per voxel
    defined_fraction: np.ndarray  # (L,) fraction of (run, voxel) scores defined
    model: str = ""
    kind: str = "fit"
    mask_label: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def n_voxels(self) -> int:
        return self.values.shape[0]

    @property
    def n_layers(self) -> int:
        return self.per_layer.shape[0]


class FactorCache:
    """Optional on-disk cache of design factorizations, keyed by content digest."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(x_train: np.ndarray) -> str:
        h = hashlib.sha256()
        h.update(str(x_train.shape).encode())
        h.update(np.ascontiguousarray(x_train).tobytes())
        return h.hexdigest()

    def get_or_compute(self, x_train: np.ndarray) -> RidgeFactorization:
        path = self.directory / (self.key(x_train) + ".npz")
        if path.exists():
            with np.load(path) as z:
                return RidgeFactorization(
                    u=z["u"], s=z["s"], vt=z["vt"], col_mean=z["col_mean"], col_scale=z["col_scale"]
                )
        fact = factorize(x_train)
        # unique temp name: concurrent folds can compute the same key, and
        # np.savez on a bare path would append its own .npz suffix
        tmp = path.with_suffix(f".{uuid.uuid4().hex}.tmp")
        with open(tmp, "wb") as fh:
            np.savez(
                fh, u=fact.u, s=fact.s, vt=fact.vt, col_mean=fact.col_mean, col_scale=fact.col_scale
            )
        tmp.replace(path)
        return fact


def _fold_score(
    xs: list[np.ndarray],
    ys: list[np.ndarray],
    k: int,
    alphas: np.ndarray,
    mask_idx: np.ndarray,
    inner_cv: str,
    cache: FactorCache | None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """One outer fold: pick alpha on validation run(s), refit, score run k."""
    n_runs = len(xs)
    train_ids = [i for i in range(n_runs) if i != k]
    if inner_cv == "single":
        val_ids = [(k + 1) % n_runs]
    elif inner_cv == "rotate":
        val_ids = list(train_ids)
    else:
        raise InputError(f"inner_cv must be 'single' or 'rotate', got {inner_cv!r}")

    val_scores = np.zeros(len(alphas))
    for v in val_ids:
        inner = [i for i in train_ids if i != v]
        x_inner = np.concatenate([xs[i] for i in inner])
        y_inner = np.concatenate([ys[i] for i in inner])
        fact = cache.get_or_compute(x_inner) if cache else factorize(x_inner)
        fact.attach_targets(y_inner)
        rot = fact.transform(xs[v]) @ fact.vt.T
        preds = spectral_sweep(fact, fact.uty, rot, alphas)
        for a in range(len(alphas)):
            r, _ = kernels.pearson_columns(ys[v], preds[a] + fact.y_mean)
            val_scores[a] += r[mask_idx].mean()
    val_scores /= len(val_ids)
    if not np.isfinite(val_scores).any():
        raise NumericError("validation scores are non-finite for every alpha")
    best = int(np.argmax(val_scores))

    x_train = np.concatenate([xs[i] for i in train_ids])
    y_train = np.concatenate([ys[i] for i in train_ids])
    fact = cache.get_or_compute(x_train) if cache else factorize(x_train)
    fact.attach_targets(y_train)
    rot = fact.transform(xs[k]) @ fact.vt.T
    pred = spectral_sweep(fact, fact.uty, rot, alphas[best : best + 1])[0] + fact.y_mean
    r, defined = kernels.pearson_columns(ys[k], pred)
    return float(alphas[best]), r, defined


def nested_cv_score(
    layer_designs: list[list[np.ndarray]],
    bold_runs: list[BoldRun],
    alphas: np.ndarray | None = None,
    mask: Mask | None = None,
    inner_cv: str = "single",
    n_threads: int = 1,
    model: str = "",
    cache: FactorCache | None = None,
) -> ScoreMap:
    """Score every layer with the nested run-level protocol; reduce to a map.

    layer_designs[l][k] is the (n_scans_k, d) design of layer l for run k;
    bold_runs[k] holds the matching (n_scans_k, V) targets.  The mask only
    steers penalty selection; scores are produced for all voxels.
    """
    if alphas is None:
        alphas = make_alpha_grid()
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0) or np.any(np.diff(alphas) <= 0):
        raise InputError("alpha grid must be strictly increasing and positive")
    n_runs = len(bold_runs)
    if n_runs < 3:
        raise InputError(f"nested cross-validation needs at least 3 runs, got {n_runs}")
    if not layer_designs:
        raise InputError("no layers to score")
    ys = [np.asarray(b.data, dtype=float) for b in bold_runs]
    n_voxels = ys[0].shape[1]
    for k, y in enumerate(ys):
        if y.shape[1] != n_voxels:
            raise InputError(f"run {k}: voxel count {y.shape[1]} != {n_voxels}")
        if not np.isfinite(y).all():
            raise InputError(f"run {k}: non-finite BOLD values")
    for l, runs in enumerate(layer_designs):
        if len(runs) != n_runs:
            raise InputError(f"layer {l}: expected {n_runs} design matrices, got {len(runs)}")
        for k, x in enumerate(runs):
            if x.shape[0] != ys[k].shape[0]:
                raise InputError(
                    f"layer {l} run {k}: design rows {x.shape[0]} != scans {ys[k].shape[0]}"
                )
    if mask is not None and len(mask) != n_voxels:
        raise InputError(f"mask length {len(mask)} != voxel count {n_voxels}")
    mask_idx = mask.indices() if mask is not None else np.arange(n_voxels)
    if mask_idx.size == 0:
        raise InputError("selection mask is empty")

    n_layers = len(layer_designs)
    per_run = np.zeros((n_layers, n_runs, n_voxels))
    per_run_defined = np.zeros((n_layers, n_runs, n_voxels), dtype=bool)
    chosen = np.zeros((n_layers, n_runs))

    def run_task(task: tuple[int, int]) -> None:
        l, k = task
        xs = [np.asarray(x, dtype=float) for x in layer_designs[l]]
        alpha, r, defined = _fold_score(xs, ys, k, alphas, mask_idx, inner_cv, cache)
        chosen[l, k] = alpha
        per_run[l, k] = r
        per_run_defined[l, k] = defined

    tasks = [(l, k) for l in range(n_layers) for k in range(n_runs)]
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(run_task, tasks))
    else:
        for task in tasks:
            run_task(task)

    per_layer = per_run.mean(axis=1)
    best_layer = np.argmax(per_layer, axis=0)
    values = per_layer[best_layer, np.arange(n_voxels)]
    defined_fraction = per_run_defined.reshape(n_layers, -1).mean(axis=1)
    return ScoreMap(
        values=values,
        per_layer=per_layer,
        per_run=per_run,
        chosen_alphas=chosen,
        best_layer=best_layer,
        defined_fraction=defined_fraction,
        model=model,
        mask_label=mask.label if mask is not None else "all",
    )
