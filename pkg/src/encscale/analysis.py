"""Statistics downstream of score maps.

Scaling fits regress mean correlation against log10 of model size; the
same regression runs per voxel to map where scores grow with size.  The
left/right machinery compares hemispheres (MNI x < 0 is left, x > 0 right,
midline excluded) globally, within spherical ROIs, and per atlas parcel.

The p-value path is shared by everything here: a t statistic is converted
to a two-sided p through the regularized incomplete beta function,
p = I_{df/(df+t^2)}(df/2, 1/2), clamped away from zero so p is always in
(0, 1].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .encoder import ScoreMap
from .errors import InputError, NumericError
from .matio import Mask, ModelEntry, VoxelGeometry
from .reliability import IscMap

P_FLOOR = np.finfo(float).tiny  # clamp: reported p is never exactly 0
DISPLAY_P_THRESHOLD = 1e-7
ISC_FLOOR = 0.05
DEFAULT_N_BOOT = 10_000


def t_to_p(t: float | np.ndarray, df: float) -> float | np.ndarray:
    """Two-sided p for a t statistic with df degrees of freedom."""
    if df <= 0:
        raise InputError(f"degrees of freedom must be positive, got {df}")
    t2 = np.square(t)
    with np.errstate(invalid="ignore"):
        p = betainc(df / 2.0, 0.5, df / (df + t2))
    p = np.where(np.isinf(t2), 0.0, p)
    return np.maximum(p, P_FLOOR) if np.ndim(t) else float(max(p, P_FLOOR))


def pearson_r_pvalue(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Pearson r and its two-sided p from t = r sqrt((n-2)/(1-r^2))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n < 3:
        raise InputError(f"need at least 3 points, got {n}")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0:
        raise InputError("zero variance input to correlation")
    r = float(np.clip((xc @ yc) / denom, -1.0, 1.0))
    if abs(r) == 1.0:
        return r, P_FLOOR
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return r, t_to_p(t, n - 2)


def two_sample_ttest(a: np.ndarray, b: np.ndarray, welch: bool = False) -> tuple[float, float]:
    """Two-sided two-sample t-test, pooled variance by default."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise InputError(f"each sample needs >= 2 values, got {na} and {nb}")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    diff = a.mean() - b.mean()
    if welch:
        se2 = va / na + vb / nb
        if se2 == 0:
            if diff == 0:
                return 0.0, 1.0
            raise NumericError("zero variance in both samples with unequal means")
        df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
        t = float(diff / np.sqrt(se2))
        return t, t_to_p(t, df)
    df = na + nb - 2
    sp2 = ((na - 1) * va + (nb - 1) * vb) / df
    if sp2 == 0:
        if diff == 0:
            return 0.0, 1.0
        raise NumericError("zero variance in both samples with unequal means")
    t = float(diff / np.sqrt(sp2 * (1.0 / na + 1.0 / nb)))
    return t, t_to_p(t, df)


@dataclass
class FitResult:
    """Simple linear regression with bootstrap confidence interval."""

    slope: float
    intercept: float
    r: float
    p_value: float
    ci95: tuple[float, float]
    n_points: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r": self.r,
            "p_value": self.p_value,
            "ci95": list(self.ci95),
            "n_points": self.n_points,
        }


def scaling_fit(
    x: np.ndarray, y: np.ndarray, n_boot: int = DEFAULT_N_BOOT, seed: int = 0
) -> FitResult:
    """OLS of y on x with Pearson p-value and percentile-bootstrap slope CI.

    Resamples drawing all-identical x are uninformative about the slope
    and are skipped; for exactly collinear data the interval collapses to
    the true slope.  Two points interpolate exactly and leave no residual
    degrees of freedom, so n = 2 reports |r| = 1 with p = 1: the line is
    defined but carries no evidence.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise InputError(f"need at least 2 points, got {n}")
    if x.shape != y.shape:
        raise InputError(f"shape mismatch: {x.shape} vs {y.shape}")
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx == 0:
        raise InputError("all x values identical; slope undefined")
    slope = float((xc @ y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    if y.var() == 0:
        r, p = 0.0, 1.0
    elif n == 2:
        r, p = math.copysign(1.0, slope), 1.0
    else:
        r, p = pearson_r_pvalue(x, y)

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_boot, n))
    bx = x[idx]
    by = y[idx]
    bxc = bx - bx.mean(axis=1, keepdims=True)
    bsxx = np.einsum("ij,ij->i", bxc, bxc)
    ok = bsxx > 0
    if not ok.any():
        ci = (slope, slope)
    else:
        bslopes = np.einsum("ij,ij->i", bxc[ok], by[ok]) / bsxx[ok]
        lo, hi = np.percentile(bslopes, [2.5, 97.5])
        ci = (float(lo), float(hi))
    return FitResult(slope=slope, intercept=intercept, r=r, p_value=p, ci95=ci, n_points=n)


def log10_parameters(metas: list[ModelEntry]) -> np.ndarray:
    for m in metas:
        if m.n_parameters <= 0:
            raise InputError(f"model {m.name!r}: n_parameters must be positive")
    return np.log10([m.n_parameters for m in metas])


def mean_score(score_map: ScoreMap, mask: Mask | None = None) -> float:
    """Mean r over masked voxels; NaN-flagged voxels are excluded."""
    values = score_map.values
    if mask is not None:
        if len(mask) != values.shape[0]:
            raise InputError(f"mask length {len(mask)} != map length {values.shape[0]}")
        values = values[mask.bits]
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise InputError("no voxels selected")
    return float(values.mean())


def voxelwise_slopes(
    maps: list[ScoreMap], metas: list[ModelEntry]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-voxel OLS slope of r against log10(parameters), with p-values.

    p comes from t = slope/SE with n-2 df.  Voxels whose residuals are
    exactly zero get p = tiny (perfect linear growth) unless the slope is
    also zero, which reports p = 1.
    """
    if len(maps) < 3:
        raise InputError(f"need at least 3 models, got {len(maps)}")
    if len(maps) != len(metas):
        raise InputError(f"{len(maps)} maps vs {len(metas)} metadata entries")
    x = log10_parameters(metas)
    stack = np.stack([m.values for m in maps])  # (M, V)
    n = x.shape[0]
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx == 0:
        raise InputError("all models have the same parameter count")
    yc = stack - stack.mean(axis=0)
    slopes = (xc @ yc) / sxx
    resid = yc - xc[:, None] * slopes
    sse = np.einsum("ij,ij->j", resid, resid)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.sqrt(sse / (n - 2) / sxx)
        t = slopes / se
    p = np.where(
        se > 0,
        t_to_p(np.where(se > 0, t, 0.0), n - 2),
        np.where(slopes == 0, 1.0, P_FLOOR),
    )
    return slopes, p


def significant_voxels(p_map: np.ndarray, threshold: float = DISPLAY_P_THRESHOLD) -> Mask:
    return Mask(bits=np.asarray(p_map) < threshold, label=f"p<{threshold:g}")


def hemisphere_bits(geometry: VoxelGeometry, which: str) -> np.ndarray:
    """Boolean selector for one hemisphere; the x = 0 midline never counts."""
    if which == "left":
        return geometry.coords[:, 0] < 0
    if which == "right":
        return geometry.coords[:, 0] > 0
    raise InputError(f"hemisphere must be 'left' or 'right', got {which!r}")


@dataclass
class AsymmetrySeries:
    """Hemisphere means and their difference per model, plus the diff fit."""

    log10_params: np.ndarray  # (M,)
    mean_left: np.ndarray  # (M,)
    mean_right: np.ndarray  # (M,)
    diff: np.ndarray  # (M,) exactly mean_left - mean_right
    fit: FitResult
    model_names: list[str] = field(default_factory=list)


def lr_series(
    maps: list[ScoreMap],
    metas: list[ModelEntry],
    geometry: VoxelGeometry,
    mask: Mask | None = None,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
) -> AsymmetrySeries:
    """Left/right mean scores per model and the scaling fit of their gap."""
    if len(maps) != len(metas):
        raise InputError(f"{len(maps)} maps vs {len(metas)} metadata entries")
    n_voxels = maps[0].n_voxels
    if len(geometry) != n_voxels:
        raise InputError(f"geometry length {len(geometry)} != map length {n_voxels}")
    keep = mask.bits if mask is not None else np.ones(n_voxels, dtype=bool)
    left = hemisphere_bits(geometry, "left") & keep
    right = hemisphere_bits(geometry, "right") & keep
    if not left.any() or not right.any():
        raise InputError("a hemisphere has no selected voxels")
    x = log10_parameters(metas)
    mean_left = np.array([float(m.values[left].mean()) for m in maps])
    mean_right = np.array([float(m.values[right].mean()) for m in maps])
    diff = mean_left - mean_right
    fit = scaling_fit(x, diff, n_boot=n_boot, seed=seed)
    return AsymmetrySeries(
        log10_params=x,
        mean_left=mean_left,
        mean_right=mean_right,
        diff=diff,
        fit=fit,
        model_names=[m.name for m in metas],
    )


def top_fraction_mask(
    score_map: ScoreMap | np.ndarray,
    geometry: VoxelGeometry,
    hemisphere: str,
    fraction: float,
) -> Mask:
    """Best ceil(fraction * n) voxels of one hemisphere; ties go to lower id."""
    if not 0 < fraction <= 1:
        raise InputError(f"fraction must be in (0, 1], got {fraction}")
    values = score_map.values if isinstance(score_map, ScoreMap) else np.asarray(score_map)
    hemi = hemisphere_bits(geometry, hemisphere)
    hemi_idx = np.flatnonzero(hemi)
    if hemi_idx.size == 0:
        raise InputError(f"{hemisphere} hemisphere is empty")
    n_top = int(np.ceil(fraction * hemi_idx.size))
    order = np.argsort(-values[hemi_idx], kind="stable")
    bits = np.zeros(len(values), dtype=bool)
    bits[hemi_idx[order[:n_top]]] = True
    return Mask(bits=bits, label=f"top{fraction:g}-{hemisphere}")


@dataclass
class RoiSpec:
    """A sphere in MNI space."""

    label: str
    center: tuple[float, float, float]
    radius: float = 10.0
    hemisphere: str = "left"

    def __post_init__(self):
        if self.radius <= 0:
            raise InputError(f"ROI {self.label!r}: radius must be positive")


# Standard left-lateralized language network spheres (MNI mm).
DEFAULT_ROIS = (
    RoiSpec("TP", (-48.0, 15.0, -27.0)),
    RoiSpec("aSTS", (-54.0, -12.0, -12.0)),
    RoiSpec("pSTS", (-51.0, -39.0, 3.0)),
    RoiSpec("AG_TPJ", (-52.0, -56.0, 22.0)),
    RoiSpec("BA44", (-50.0, 12.0, 16.0)),
    RoiSpec("BA45", (-52.0, 28.0, 10.0)),
    RoiSpec("BA47", (-44.0, 34.0, -8.0)),
)


def roi_mask(spec: RoiSpec, geometry: VoxelGeometry) -> Mask:
    """Voxels within spec.radius (inclusive) of the sphere center."""
    delta = geometry.coords - np.asarray(spec.center)
    bits = np.einsum("ij,ij->i", delta, delta) <= spec.radius**2
    if not bits.any():
        warnings.warn(f"ROI {spec.label!r} contains no voxels", stacklevel=2)
    return Mask(bits=bits, label=spec.label)


def mirror_roi(spec: RoiSpec) -> RoiSpec:
    cx, cy, cz = spec.center
    flipped = "right" if spec.hemisphere == "left" else "left"
    return replace(spec, center=(-cx, cy, cz), hemisphere=flipped, label=spec.label + "_mirror")


def roi_slope_ttest(
    left_slopes: np.ndarray, right_slopes: np.ndarray, welch: bool = False
) -> tuple[float, float]:
    """Do slopes inside an ROI differ from its mirrored counterpart?"""
    return two_sample_ttest(left_slopes, right_slopes, welch=welch)


def roi_interaction_corr(
    maps: list[ScoreMap],
    metas: list[ModelEntry],
    roi: RoiSpec,
    geometry: VoxelGeometry,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
) -> FitResult:
    """Scaling fit of the ROI-mean left-minus-mirror gap across models."""
    left = roi_mask(roi, geometry)
    right = roi_mask(mirror_roi(roi), geometry)
    if left.n_selected == 0 or right.n_selected == 0:
        raise InputError(f"ROI {roi.label!r} or its mirror selects no voxels")
    x = log10_parameters(metas)
    diffs = np.array(
        [float(m.values[left.bits].mean() - m.values[right.bits].mean()) for m in maps]
    )
    return scaling_fit(x, diffs, n_boot=n_boot, seed=seed)


def normalize_by_isc(score_map: ScoreMap, isc_map: IscMap, floor: float = ISC_FLOOR) -> ScoreMap:
    """Divide scores by per-voxel reliability; unreliable voxels become NaN.

    Voxels with ISC below the floor cannot be normalized stably; they are
    set to NaN, which mean_score then excludes.
    """
    if isc_map.values.shape != score_map.values.shape:
        raise InputError(
            f"ISC length {isc_map.values.shape[0]} != map length {score_map.values.shape[0]}"
        )
    included = isc_map.values >= floor
    values = np.full_like(score_map.values, np.nan)
    values[included] = score_map.values[included] / isc_map.values[included]
    return replace(
        score_map,
        values=values,
        kind="isc_normalized",
        extra=dict(score_map.extra, isc_floor=floor, n_excluded=int((~included).sum())),
    )


def covariate_fit(
    metas: list[ModelEntry],
    maps: list[ScoreMap],
    covariate: str,
    mask: Mask | None = None,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
) -> FitResult:
    """Regress mean score on a per-model covariate (raw value, sign kept)."""
    if len(maps) != len(metas):
        raise InputError(f"{len(maps)} maps vs {len(metas)} metadata entries")
    xs = []
    for m in metas:
        if covariate not in m.covariates:
            raise InputError(f"model {m.name!r} has no covariate {covariate!r}")
        xs.append(m.covariates[covariate])
    ys = [mean_score(sm, mask) for sm in maps]
    return scaling_fit(np.asarray(xs), np.asarray(ys), n_boot=n_boot, seed=seed)


@dataclass
class ParcelLabels:
    """Per-voxel atlas assignment; parcel_id -1 marks unlabeled voxels."""

    parcel_id: np.ndarray  # (V,) int
    hemisphere: np.ndarray  # (V,) 'L'/'R'/'' per voxel
    names: dict[int, str]

    def __len__(self) -> int:
        return self.parcel_id.shape[0]


def read_parcels(path: str | Path, n_voxels: int) -> ParcelLabels:
    """TSV columns: voxel_id, parcel_id, parcel_name, hemisphere."""
    parcel_id = np.full(n_voxels, -1, dtype=int)
    hemisphere = np.full(n_voxels, "", dtype="U1")
    names: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != ["voxel_id", "parcel_id", "parcel_name", "hemisphere"]:
            raise InputError(f"{path}: bad parcel header {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise InputError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            vid = int(parts[0])
            pid = int(parts[1])
            if not 0 <= vid < n_voxels:
                raise InputError(f"{path}:{lineno}: voxel_id {vid} out of range")
            if pid < 0:
                raise InputError(f"{path}:{lineno}: parcel_id must be >= 0")
            hemi = parts[3].strip().upper()[:1]
            if hemi not in ("L", "R"):
                raise InputError(f"{path}:{lineno}: hemisphere must be left or right")
            parcel_id[vid] = pid
            hemisphere[vid] = hemi
            if pid in names and names[pid] != parts[2]:
                raise InputError(f"{path}:{lineno}: parcel {pid} renamed to {parts[2]!r}")
            names[pid] = parts[2]
    return ParcelLabels(parcel_id=parcel_id, hemisphere=hemisphere, names=names)


@dataclass
class ParcelRow:
    parcel_id: int
    name: str
    n_left: int
    n_right: int
    mean_left: float
    mean_right: float
    diff: float
    t: float
    p: float


def parcel_summary(score_map: ScoreMap, labels: ParcelLabels) -> list[ParcelRow]:
    """Mean score per parcel and homologous left/right contrast.

    The t-test needs two voxels per side; smaller parcels report NaN t/p
    but keep their means.
    """
    if len(labels) != score_map.n_voxels:
        raise InputError(f"label length {len(labels)} != map length {score_map.n_voxels}")
    rows: list[ParcelRow] = []
    for pid in sorted(labels.names):
        in_parcel = labels.parcel_id == pid
        left = score_map.values[in_parcel & (labels.hemisphere == "L")]
        right = score_map.values[in_parcel & (labels.hemisphere == "R")]
        left = left[np.isfinite(left)]
        right = right[np.isfinite(right)]
        mean_left = float(left.mean()) if left.size else np.nan
        mean_right = float(right.mean()) if right.size else np.nan
        if left.size >= 2 and right.size >= 2:
            try:
                t, p = two_sample_ttest(left, right)
            except NumericError:
                t, p = np.nan, np.nan
        else:
            t, p = np.nan, np.nan
        rows.append(
            ParcelRow(
                parcel_id=pid,
                name=labels.names[pid],
                n_left=int(left.size),
                n_right=int(right.size),
                mean_left=mean_left,
                mean_right=mean_right,
                diff=mean_left - mean_right,
                t=t,
                p=p,
            )
        )
    return rows


@dataclass
class LayerProfile:
    """Mean score per retained layer sub-map against relative depth."""

    depths: np.ndarray  # (L,) layer_index / (L - 1); embedding at 0
    mean_r: np.ndarray  # (L,)
    best_depth: float


def layer_profile(score_map: ScoreMap, mask: Mask | None = None) -> LayerProfile:
    n_layers = score_map.n_layers
    keep = mask.bits if mask is not None else np.ones(score_map.n_voxels, dtype=bool)
    if not keep.any():
        raise InputError("no voxels selected")
    depths = (
        np.arange(n_layers) / (n_layers - 1) if n_layers > 1 else np.zeros(1)
    )
    mean_r = score_map.per_layer[:, keep].mean(axis=1)
    return LayerProfile(depths=depths, mean_r=mean_r, best_depth=float(depths[np.argmax(mean_r)]))
