"""Inter-subject reliability maps.

A voxel is only worth modeling if it responds consistently across people.
The measure here is model-free: split the cohort into two near-halves,
average each half, then predict every voxel of one group average from the
full voxel matrix of the other group average, using exactly the same
ridge machinery and run-level cross-validation as the encoding models.
Repeating over random splits and averaging gives a per-voxel reliability
score that doubles as a noise-ceiling estimate downstream.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .encoder import nested_cv_score
from .errors import InputError
from .preprocess import BoldRun, average_subjects

DIRECTION_MODES = ("both", "ab")


@dataclass
class IscMap:
    """Per-voxel inter-group correlation averaged over cohort splits."""

    values: np.ndarray  # (V,)
    n_splits: int
    split_seeds: list[list[int]]  # derived rng seed per split, for audit
    per_split: np.ndarray  # (n_splits, V)
    group_sizes: tuple[int, int] = (0, 0)
    kind: str = "isc"
    extra: dict = field(default_factory=dict)


def split_cohort(n_subjects: int, split_seed: list[int]) -> tuple[list[int], list[int]]:
    """Disjoint halves of sizes floor(n/2) and ceil(n/2), seeded shuffle."""
    perm = np.random.default_rng(split_seed).permutation(n_subjects)
    half = n_subjects // 2
    return sorted(int(i) for i in perm[:half]), sorted(int(i) for i in perm[half:])


def isc(
    subject_runs: list[list[BoldRun]],
    n_splits: int = 10,
    seed: int = 0,
    alphas: np.ndarray | None = None,
    inner_cv: str = "single",
    directions: str = "both",
    n_threads: int = 1,
) -> IscMap:
    """Split-half inter-subject correlation through the encoder.

    subject_runs[i][k] is run k of subject i, all aligned in scans and
    voxels.  Per split, group B's average voxel matrix is the design and
    group A's average the target (and symmetrically with directions="both").
    """
    n_subjects = len(subject_runs)
    if n_subjects < 2:
        raise InputError(f"need at least 2 subjects, got {n_subjects}")
    if directions not in DIRECTION_MODES:
        raise InputError(f"directions must be one of {DIRECTION_MODES}, got {directions!r}")
    if n_splits < 1:
        raise InputError(f"n_splits must be >= 1, got {n_splits}")
    n_runs = len(subject_runs[0])
    for i, runs in enumerate(subject_runs):
        if len(runs) != n_runs:
            raise InputError(f"subject {i}: {len(runs)} runs, expected {n_runs}")
        for k, run in enumerate(runs):
            if run.data.shape != subject_runs[0][k].data.shape:
                raise InputError(
                    f"subject {i} run {k}: shape {run.data.shape} != "
                    f"{subject_runs[0][k].data.shape}"
                )
    n_voxels = subject_runs[0][0].n_voxels
    split_seeds = [[seed, j] for j in range(n_splits)]
    per_split = np.zeros((n_splits, n_voxels))

    def run_split(j: int) -> None:
        group_a, group_b = split_cohort(n_subjects, split_seeds[j])
        avg_a = [average_subjects([subject_runs[i][k] for i in group_a]) for k in range(n_runs)]
        avg_b = [average_subjects([subject_runs[i][k] for i in group_b]) for k in range(n_runs)]
        score_ab = nested_cv_score(
            [[r.data for r in avg_b]], avg_a, alphas=alphas, inner_cv=inner_cv
        ).values
        if directions == "ab":
            per_split[j] = score_ab
            return
        score_ba = nested_cv_score(
            [[r.data for r in avg_a]], avg_b, alphas=alphas, inner_cv=inner_cv
        ).values
        per_split[j] = 0.5 * (score_ab + score_ba)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(run_split, range(n_splits)))
    else:
        for j in range(n_splits):
            run_split(j)

    sizes = (n_subjects // 2, n_subjects - n_subjects // 2)
    return IscMap(
        values=per_split.mean(axis=0),
        n_splits=n_splits,
        split_seeds=split_seeds,
        per_split=per_split,
        group_sizes=sizes,
    )
