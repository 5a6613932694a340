"""Temporal cleaning of BOLD runs, subject averaging, and mask construction.

The per-subject pipeline order is fixed: high-pass filter, linear detrend,
standardize, then average subjects per run, then trim the run edges and
standardize again.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .matio import Mask, VoxelGeometry


@dataclass
class BoldRun:
    """One run of BOLD data, scans by voxels, plus acquisition metadata."""

    data: np.ndarray  # (n_scans, n_voxels) float64
    tr: float
    run_id: int = 0

    @property
    def n_scans(self) -> int:
        return self.data.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.data.shape[1]


def drift_basis(n_scans: int, tr: float, cutoff: float) -> np.ndarray:
    """Constant plus the K lowest discrete-cosine drift terms.

    K = floor(2 * n_scans * tr / cutoff); columns are orthonormal DCT-II
    vectors cos(pi * k * (t + 1/2) / n_scans).
    """
    k_drift = int(np.floor(2.0 * n_scans * tr / cutoff))
    t = np.arange(n_scans)
    cols = [np.full(n_scans, 1.0 / np.sqrt(n_scans))]
    for k in range(1, k_drift + 1):
        c = np.cos(np.pi * k * (t + 0.5) / n_scans)
        cols.append(c * np.sqrt(2.0 / n_scans))
    return np.column_stack(cols)


def highpass_dct(run: BoldRun, cutoff: float) -> BoldRun:
    """Project out slow cosine drifts below 1/cutoff Hz (plus the mean)."""
    if cutoff <= 2.0 * run.tr:
        raise InputError(f"cutoff must exceed 2*tr = {2.0 * run.tr}, got {cutoff}")
    basis = drift_basis(run.n_scans, run.tr, cutoff)
    # basis is orthonormal, so the projection is basis @ (basis.T @ data)
    cleaned = run.data - basis @ (basis.T @ run.data)
    return replace(run, data=cleaned)


def detrend_linear(run: BoldRun) -> BoldRun:
    """Remove the least-squares line over scan index from every voxel."""
    n = run.n_scans
    if n < 3:
        raise InputError(f"need at least 3 scans to detrend, got {n}")
    t = np.arange(n, dtype=float)
    t -= t.mean()
    data = run.data - run.data.mean(axis=0)
    slope = (t @ data) / (t @ t)
    return replace(run, data=run.data - run.data.mean(axis=0) - np.outer(t, slope))


def standardize(run: BoldRun) -> BoldRun:
    """Zero mean, unit population variance per voxel; dead voxels become 0."""
    centered = run.data - run.data.mean(axis=0)
    sd = np.sqrt((centered * centered).mean(axis=0))
    # exact constancy check: mean subtraction can leave an eps residue on a
    # constant voxel, which the division would blow up to O(1) noise
    live = (sd > 0) & (run.data != run.data[0]).any(axis=0)
    out = np.divide(centered, sd, out=np.zeros_like(centered), where=live)
    return replace(run, data=out)


def average_subjects(runs: list[BoldRun]) -> BoldRun:
    """Element-wise mean of the same run across subjects."""
    if not runs:
        raise InputError("average_subjects needs at least one run")
    first = runs[0]
    for r in runs[1:]:
        if r.data.shape != first.data.shape:
            raise InputError(
                f"shape mismatch across subjects: {r.data.shape} != {first.data.shape}"
            )
        if r.tr != first.tr:
            raise InputError(f"TR mismatch across subjects: {r.tr} != {first.tr}")
    mean = np.mean(np.stack([r.data for r in runs]), axis=0)
    return replace(first, data=mean)


def trim_run(run: BoldRun, trim_seconds: float) -> BoldRun:
    """Drop floor(trim/tr) scans at each end, then standardize the rest."""
    n_drop = trim_scan_count(trim_seconds, run.tr)
    if run.n_scans <= 2 * n_drop:
        raise InputError(
            f"run {run.run_id} too short to trim {trim_seconds}s: "
            f"{run.n_scans} scans, would drop {2 * n_drop}"
        )
    kept = run.data[n_drop : run.n_scans - n_drop] if n_drop else run.data
    return standardize(replace(run, data=kept))


def trim_scan_count(trim_seconds: float, tr: float) -> int:
    return int(np.floor(trim_seconds / tr))


def preprocess_subject_run(run: BoldRun, cutoff: float = 128.0) -> BoldRun:
    """The fixed per-subject per-run pipeline: high-pass, detrend, standardize."""
    return standardize(detrend_linear(highpass_dct(run, cutoff)))


def multi_subject_mask(subject_masks: list[Mask], threshold: float) -> Mask:
    """Keep a voxel iff it appears in at least threshold * n_subjects masks."""
    if not subject_masks:
        raise InputError("multi_subject_mask needs at least one mask")
    if not 0 < threshold <= 1:
        raise InputError(f"threshold must be in (0, 1], got {threshold}")
    n = len(subject_masks[0])
    for m in subject_masks[1:]:
        if len(m) != n:
            raise InputError(f"mask length mismatch: {len(m)} != {n}")
    counts = np.sum([m.bits for m in subject_masks], axis=0)
    bits = counts >= threshold * len(subject_masks)
    return Mask(bits=bits, label=f"multi_subject_{threshold:g}")


def _mirror_index(geometry: VoxelGeometry, tol_mm: float = 1e-6) -> np.ndarray:
    """Index of the x-mirrored voxel for each voxel, -1 when absent.

    Coordinates are snapped to the inferred grid before matching, so mm
    jitter below tol_mm cannot break pairing.
    """
    spacing = geometry.grid_spacing()
    snapped = np.round(geometry.coords / spacing).astype(np.int64)
    if np.abs(geometry.coords - snapped * spacing).max() > tol_mm:
        raise InputError("geometry coordinates do not lie on a regular grid")
    lookup = {tuple(c): i for i, c in enumerate(snapped)}
    mirror = np.full(len(geometry), -1, dtype=np.int64)
    for i, (x, y, z) in enumerate(snapped):
        mirror[i] = lookup.get((-x, y, z), -1)
    return mirror


def symmetrize_mask(mask: Mask, geometry: VoxelGeometry) -> Mask:
    """Keep a voxel iff both it and its (-x, y, z) mirror are kept."""
    mirror = _mirror_index(geometry)
    bits = mask.bits.copy()
    has_mirror = mirror >= 0
    bits &= has_mirror
    bits[has_mirror] &= mask.bits[mirror[has_mirror]]
    return Mask(bits=bits, label=f"{mask.label}_sym" if mask.label else "sym")


def select_reliable(isc_values: np.ndarray, fraction: float) -> Mask:
    """Top ceil(fraction * n) voxels by reliability, ties to lower voxel_id."""
    if not 0 < fraction <= 1:
        raise InputError(f"fraction must be in (0, 1], got {fraction}")
    values = np.asarray(isc_values, dtype=float)
    n = values.shape[0]
    n_keep = int(np.ceil(fraction * n))
    # stable sort on voxel_id, then stable sort on -value keeps id order in ties
    order = np.argsort(-values, kind="stable")
    bits = np.zeros(n, dtype=bool)
    bits[order[:n_keep]] = True
    return Mask(bits=bits, label=f"reliable_{fraction:g}")
