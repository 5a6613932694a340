"""Command-line surface.

Commands operate on a study directory described by two JSON manifests (the
study: runs, BOLD and event paths, geometry; the models: per-layer feature
paths and metadata) and write everything under --out with a fixed layout:

    out/maps/<model>.score.npy    per-voxel map, one column
    out/maps/<model>.score.json   sidecar: chosen alphas, per-layer means
    out/maps/<model>.layers.npy   per-layer per-voxel sub-maps
    out/tables/*.tsv, *.json      analysis outputs
    out/report.json               consolidated report

Every sidecar carries the same provenance block (tool version, manifest
digests, seed, alpha grid) and no timestamps, so reruns with identical
inputs are byte-identical.  Exit codes: 0 ok, 2 invalid input, 3 numeric
failure.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, analysis, design, preprocess, reliability, synth
from . import encoder as enc
from . import matio
from .errors import InputError, NumericError

_JSON_ERRORS = False


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _provenance(inputs: dict[str, Path], seed: int | None, alphas: np.ndarray | None) -> dict:
    block = {
        "tool": "encscale",
        "version": __version__,
        "inputs": {name: _digest(p) for name, p in sorted(inputs.items())},
    }
    if seed is not None:
        block["seed"] = seed
    if alphas is not None:
        block["alphas"] = [float(a) for a in alphas]
    return block


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _parse_alphas(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError(f"--alphas expects min,max,count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise InputError(f"--alphas expects min,max,count, got {text!r}") from e
    return enc.make_alpha_grid(lo, hi, count)


def _resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


def _thread_count(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("LS_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError as e:
            raise InputError(f"LS_THREADS must be an integer, got {env!r}") from e
    return 1


class Study:
    """A study manifest plus everything it points to, loaded and validated."""

    def __init__(self, manifest_path: Path):
        self.path = manifest_path
        m = matio.read_manifest(manifest_path)
        if not isinstance(m, matio.StudyManifest):
            raise InputError(f"{manifest_path}: not a study manifest")
        self.manifest = m
        base = manifest_path.parent
        self.geometry = matio.read_geometry(_resolve(base, m.geometry_path))
        self.events = [matio.read_events(_resolve(base, r.events_path)) for r in m.runs]
        self.trim_scans = preprocess.trim_scan_count(m.trim_seconds, m.tr)

    def bold_runs(self) -> list[preprocess.BoldRun]:
        """Trimmed analysis-ready BOLD, averaging subjects when present."""
        base = self.path.parent
        m = self.manifest
        out = []
        for r in m.runs:
            if m.subjects:
                per_subject = []
                for name in sorted(m.subjects):
                    rel = m.subjects[name].get(r.run_id)
                    if rel is None:
                        raise InputError(f"subject {name!r} missing run {r.run_id}")
                    raw = matio.read_matrix(_resolve(base, rel))
                    run = preprocess.BoldRun(data=raw.astype(float), tr=m.tr, run_id=r.run_id)
                    per_subject.append(preprocess.preprocess_subject_run(run))
                run = preprocess.average_subjects(per_subject)
            else:
                raw = matio.read_matrix(_resolve(base, r.bold_path))
                run = preprocess.BoldRun(data=raw.astype(float), tr=m.tr, run_id=r.run_id)
            if run.n_scans != r.n_scans:
                raise InputError(
                    f"run {r.run_id}: manifest says {r.n_scans} scans, file has {run.n_scans}"
                )
            if run.n_voxels != len(self.geometry):
                raise InputError(
                    f"run {r.run_id}: {run.n_voxels} voxels != geometry {len(self.geometry)}"
                )
            if m.trim_seconds > 0:
                run = preprocess.trim_run(run, m.trim_seconds)
            out.append(run)
        return out

    def layer_designs(self, entry: matio.ModelEntry, models_dir: Path) -> list[list[np.ndarray]]:
        """HRF designs per layer per run, trimmed to match the BOLD."""
        m = self.manifest
        n_layers = entry.n_layers + 1
        designs: list[list[np.ndarray]] = [[] for _ in range(n_layers)]
        for r in m.runs:
            paths = entry.layer_feature_paths.get(r.run_id)
            if paths is None:
                raise InputError(f"model {entry.name!r}: no features for run {r.run_id}")
            for l, rel in enumerate(paths):
                feats = matio.read_matrix(_resolve(models_dir, rel))
                x = design.build_design(
                    feats.astype(float), self.events[r.run_id], r.n_scans, m.tr
                )
                designs[l].append(design.trim_design(x, self.trim_scans))
        return designs


def _load_models(path: Path, only: tuple[str, ...]) -> tuple[matio.ModelManifest, list[matio.ModelEntry]]:
    m = matio.read_manifest(path)
    if not isinstance(m, matio.ModelManifest):
        raise InputError(f"{path}: not a models manifest")
    if only:
        entries = [m.get(name) for name in only]
    else:
        entries = list(m.models)
    return m, entries


def _check_model_files(study: Study, entries: list[matio.ModelEntry], models_dir: Path) -> None:
    """Fail before any output is written if a referenced file is missing."""
    for entry in entries:
        for run_id, paths in entry.layer_feature_paths.items():
            for rel in paths:
                p = _resolve(models_dir, rel)
                if not p.exists():
                    raise InputError(f"model {entry.name!r} run {run_id}: missing {p}")


def _map_path(out: Path, name: str, ext: str) -> Path:
    # with_suffix would eat the ".score" part, so spell the name out
    return out / "maps" / f"{name}.score.{ext}"


def save_score_map(out: Path, name: str, smap: enc.ScoreMap, meta: dict, dtype: str) -> None:
    npy = _map_path(out, name, "npy")
    npy.parent.mkdir(parents=True, exist_ok=True)
    matio.write_matrix(npy, smap.values[:, None].astype(dtype))
    matio.write_matrix(out / "maps" / f"{name}.layers.npy", smap.per_layer.astype(dtype))
    sidecar = {
        "kind": smap.kind,
        "model": name,
        "mask": smap.mask_label,
        "mean_r": float(np.nanmean(smap.values)),
        "per_layer_mean": [float(v) for v in smap.per_layer.mean(axis=1)],
        "chosen_alphas": [[float(a) for a in row] for row in smap.chosen_alphas],
        "defined_fraction": [float(v) for v in smap.defined_fraction],
        **meta,
    }
    _write_json(_map_path(out, name, "json"), sidecar)


def load_score_map(out: Path, name: str) -> tuple[enc.ScoreMap, dict]:
    npy = _map_path(out, name, "npy")
    if not npy.exists():
        raise InputError(f"no score map for model {name!r} under {out / 'maps'}")
    values = matio.read_matrix(npy)[:, 0].astype(float)
    per_layer = matio.read_matrix(out / "maps" / f"{name}.layers.npy").astype(float)
    with open(_map_path(out, name, "json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    n_layers = per_layer.shape[0]
    smap = enc.ScoreMap(
        values=values,
        per_layer=per_layer,
        per_run=np.empty((n_layers, 0, values.shape[0])),
        chosen_alphas=np.asarray(sidecar.get("chosen_alphas", [])),
        best_layer=np.argmax(per_layer, axis=0),
        defined_fraction=np.asarray(sidecar.get("defined_fraction", [])),
        model=name,
        kind=sidecar.get("kind", "fit"),
        mask_label=sidecar.get("mask", ""),
    )
    return smap, sidecar


def _read_mask_flag(mask_path: str | None, n_voxels: int) -> matio.Mask | None:
    if mask_path is None:
        return None
    return matio.read_mask(mask_path, n_voxels, label=Path(mask_path).stem)


@click.group()
@click.option("--json", "json_errors", is_flag=True, help="Machine-readable errors on stderr.")
def cli(json_errors: bool) -> None:
    """Encoding-model scaling analysis for naturalistic fMRI."""
    global _JSON_ERRORS
    _JSON_ERRORS = json_errors


@cli.command("synth")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--runs", default=9, show_default=True)
@click.option("--scans", default=300, show_default=True)
@click.option("--voxels", default=200, show_default=True)
@click.option("--tr", default=2.0, show_default=True)
@click.option("--sigma", default=1.0, show_default=True)
@click.option("--dims", default="8,16,32,64,128,256", show_default=True)
@click.option("--left-gain", type=click.Choice(synth.LEFT_GAIN_MODES), default="harmonic", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--words-per-scan", default=2, show_default=True)
@click.option("--ar-rho", default=0.0, show_default=True)
@click.option("--dtype", type=click.Choice(["f4", "f8"]), default="f8", show_default=True)
def cmd_synth(out, runs, scans, voxels, tr, sigma, dims, left_gain, seed, words_per_scan, ar_rho, dtype):
    """Write a synthetic ground-truth study directory."""
    try:
        family = tuple(int(d) for d in dims.split(","))
    except ValueError as e:
        raise InputError(f"--dims expects comma-separated integers, got {dims!r}") from e
    cfg = synth.SynthConfig(
        n_runs=runs,
        n_scans=scans,
        n_voxels=voxels,
        tr=tr,
        noise_sigma=sigma,
        family_dims=family,
        left_gain=left_gain,
        seed=seed,
        words_per_scan=words_per_scan,
        ar_rho=ar_rho,
    )
    study = synth.gen_study(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs").mkdir(exist_ok=True)
    (out / "events").mkdir(exist_ok=True)
    matio.write_geometry(out / "geometry.tsv", study.geometry)
    runs_meta = []
    for k, (ev, run) in enumerate(zip(study.events, study.bold_runs)):
        bold_rel = f"runs/run_{k:02d}.npy"
        events_rel = f"events/run_{k:02d}.tsv"
        matio.write_matrix(out / bold_rel, run.data.astype(dtype))
        matio.write_events(out / events_rel, ev)
        runs_meta.append(
            matio.RunEntry(run_id=k, bold_path=bold_rel, events_path=events_rel, n_scans=scans)
        )
    models = []
    for d in family:
        name = f"synth-d{d}"
        (out / "features" / name).mkdir(parents=True, exist_ok=True)
        paths: dict[int, list[str]] = {}
        for k, feats in enumerate(study.features[d]):
            rel = f"features/{name}/run_{k:02d}.npy"
            matio.write_matrix(out / rel, feats.astype(dtype))
            paths[k] = [rel]
        models.append(
            matio.ModelEntry(
                name=name,
                family="synth",
                n_parameters=d,
                n_layers=0,
                n_neurons=d,
                layer_feature_paths=paths,
                covariates={"log10_params": float(np.log10(d))},
            )
        )
    matio.write_study_manifest(
        out / "study.json",
        matio.StudyManifest(tr=tr, trim_seconds=0.0, runs=runs_meta, geometry_path="geometry.tsv"),
    )
    matio.write_model_manifest(out / "models.json", matio.ModelManifest(models=models))
    matio.write_matrix(out / "truth_betas.npy", study.truth.betas.astype(dtype))
    _write_json(
        out / "truth.json",
        {
            "ceiling": [float(v) for v in study.truth.ceiling],
            "is_left": [bool(v) for v in study.truth.is_left],
            "latent_dim": study.truth.latent_dim,
            "noise_sigma": sigma,
            "seed": seed,
        },
    )
    click.echo(f"wrote synthetic study with {len(models)} models to {out}")


@cli.command("fit")
@click.option("--study", "study_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", "models_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--model", "only", multiple=True, help="Fit only these models (default: all).")
@click.option("--alphas", default="1e2,1e7,16", show_default=True, help="Penalty grid min,max,count.")
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None,
              help="Voxel mask steering penalty selection.")
@click.option("--inner-cv", type=click.Choice(["single", "rotate"]), default="single", show_default=True)
@click.option("--threads", type=int, default=None, help="Worker threads (default: LS_THREADS or 1).")
@click.option("--dtype", type=click.Choice(["f4", "f8"]), default="f8", show_default=True)
@click.option("--cache", "cache_dir", type=click.Path(path_type=Path), default=None,
              help="Directory for cached design factorizations.")
def cmd_fit(study_path, models_path, out, only, alphas, mask_path, inner_cv, threads, dtype, cache_dir):
    """Fit encoding models and write one score map per model."""
    grid = _parse_alphas(alphas)
    n_threads = _thread_count(threads)
    study = Study(study_path)
    manifest, entries = _load_models(models_path, only)
    _check_model_files(study, entries, models_path.parent)
    mask = _read_mask_flag(mask_path, len(study.geometry))
    cache = enc.FactorCache(cache_dir) if cache_dir else None
    bold = study.bold_runs()
    prov = _provenance({"study": study_path, "models": models_path}, None, grid)
    for entry in entries:
        designs = study.layer_designs(entry, models_path.parent)
        smap = enc.nested_cv_score(
            designs, bold, alphas=grid, mask=mask, inner_cv=inner_cv,
            n_threads=n_threads, model=entry.name, cache=cache,
        )
        meta = {
            "n_parameters": entry.n_parameters,
            "family": entry.family,
            "inner_cv": inner_cv,
            "provenance": prov,
        }
        save_score_map(out, entry.name, smap, meta, dtype)
        click.echo(f"{entry.name}: mean r = {float(np.nanmean(smap.values)):.4f}")


@cli.command("isc")
@click.option("--study", "study_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--splits", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--alphas", default="1e2,1e7,16", show_default=True)
@click.option("--inner-cv", type=click.Choice(["single", "rotate"]), default="single", show_default=True)
@click.option("--directions", type=click.Choice(reliability.DIRECTION_MODES), default="both", show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--dtype", type=click.Choice(["f4", "f8"]), default="f8", show_default=True)
def cmd_isc(study_path, out, splits, seed, alphas, inner_cv, directions, threads, dtype):
    """Split-half inter-subject correlation map."""
    grid = _parse_alphas(alphas)
    study = Study(study_path)
    m = study.manifest
    if not m.subjects:
        raise InputError(f"{study_path}: study has no subjects; ISC needs per-subject runs")
    base = study_path.parent
    subject_runs = []
    for name in sorted(m.subjects):
        runs = []
        for r in m.runs:
            rel = m.subjects[name].get(r.run_id)
            if rel is None:
                raise InputError(f"subject {name!r} missing run {r.run_id}")
            raw = matio.read_matrix(_resolve(base, rel))
            run = preprocess.BoldRun(data=raw.astype(float), tr=m.tr, run_id=r.run_id)
            run = preprocess.preprocess_subject_run(run)
            if m.trim_seconds > 0:
                run = preprocess.trim_run(run, m.trim_seconds)
            runs.append(run)
        subject_runs.append(runs)
    imap = reliability.isc(
        subject_runs, n_splits=splits, seed=seed, alphas=grid,
        inner_cv=inner_cv, directions=directions, n_threads=_thread_count(threads),
    )
    npy = _map_path(out, "isc", "npy")
    npy.parent.mkdir(parents=True, exist_ok=True)
    matio.write_matrix(npy, imap.values[:, None].astype(dtype))
    _write_json(
        _map_path(out, "isc", "json"),
        {
            "kind": "isc",
            "model": "isc",
            "mean_r": float(imap.values.mean()),
            "n_splits": imap.n_splits,
            "split_seeds": imap.split_seeds,
            "group_sizes": list(imap.group_sizes),
            "directions": directions,
            "provenance": _provenance({"study": study_path}, seed, grid),
        },
    )
    click.echo(f"isc: mean r = {float(imap.values.mean()):.4f} over {splits} splits")


def _analysis_inputs(out, models_path, only):
    _, entries = _load_models(models_path, only)
    entries = sorted(entries, key=lambda e: (e.n_parameters, e.name))
    maps = [load_score_map(out, e.name)[0] for e in entries]
    return entries, maps


@cli.group("analyze")
def cmd_analyze() -> None:
    """Statistics over previously fitted score maps."""


@cmd_analyze.command("scaling")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", "models_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "only", multiple=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--boot", default=analysis.DEFAULT_N_BOOT, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_scaling(out, models_path, only, mask_path, boot, seed):
    """Mean score vs log10(parameters) with bootstrap CI."""
    entries, maps = _analysis_inputs(out, models_path, only)
    mask = _read_mask_flag(mask_path, maps[0].n_voxels)
    x = analysis.log10_parameters(entries)
    y = np.array([analysis.mean_score(m, mask) for m in maps])
    fit = analysis.scaling_fit(x, y, n_boot=boot, seed=seed)
    _write_tsv(
        out / "tables" / "scaling.tsv",
        ["model", "n_parameters", "log10_params", "mean_r"],
        [[e.name, e.n_parameters, xv, yv] for e, xv, yv in zip(entries, x, y)],
    )
    _write_json(out / "tables" / "scaling.json", {"fit": fit.to_dict(), "seed": seed})
    click.echo(
        f"scaling: slope {fit.slope:.4f} ci95 [{fit.ci95[0]:.4f}, {fit.ci95[1]:.4f}] "
        f"r {fit.r:.3f} p {fit.p_value:.3g}"
    )


@cmd_analyze.command("asymmetry")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--study", "study_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", "models_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "only", multiple=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--boot", default=analysis.DEFAULT_N_BOOT, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_asymmetry(out, study_path, models_path, only, mask_path, boot, seed):
    """Left-minus-right mean score per model and its scaling fit."""
    entries, maps = _analysis_inputs(out, models_path, only)
    geometry = Study(study_path).geometry
    mask = _read_mask_flag(mask_path, maps[0].n_voxels)
    series = analysis.lr_series(maps, entries, geometry, mask, n_boot=boot, seed=seed)
    _write_tsv(
        out / "tables" / "asymmetry.tsv",
        ["model", "log10_params", "mean_left", "mean_right", "diff"],
        [
            [name, x, l, r, d]
            for name, x, l, r, d in zip(
                series.model_names, series.log10_params, series.mean_left,
                series.mean_right, series.diff,
            )
        ],
    )
    _write_json(out / "tables" / "asymmetry.json", {"fit": series.fit.to_dict(), "seed": seed})
    fit = series.fit
    click.echo(f"asymmetry: slope {fit.slope:.4f} r {fit.r:.3f} p {fit.p_value:.3g}")


@cmd_analyze.command("roi")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--study", "study_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", "models_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "only", multiple=True)
@click.option("--radius", default=10.0, show_default=True)
@click.option("--welch", is_flag=True, help="Welch t-test instead of pooled variance.")
@click.option("--boot", default=analysis.DEFAULT_N_BOOT, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_roi(out, study_path, models_path, only, radius, welch, boot, seed):
    """Per-ROI left/right contrasts: slope t-test and L-R scaling correlation."""
    entries, maps = _analysis_inputs(out, models_path, only)
    geometry = Study(study_path).geometry
    slopes, _ = analysis.voxelwise_slopes(maps, entries)
    rows = []
    for spec in analysis.DEFAULT_ROIS:
        spec = analysis.RoiSpec(spec.label, spec.center, radius, spec.hemisphere)
        left = analysis.roi_mask(spec, geometry)
        right = analysis.roi_mask(analysis.mirror_roi(spec), geometry)
        if left.n_selected < 2 or right.n_selected < 2:
            rows.append([spec.label, left.n_selected, right.n_selected] + [np.nan] * 4)
            continue
        t, p = analysis.roi_slope_ttest(slopes[left.bits], slopes[right.bits], welch=welch)
        fit = analysis.roi_interaction_corr(maps, entries, spec, geometry, n_boot=boot, seed=seed)
        rows.append([spec.label, left.n_selected, right.n_selected, t, p, fit.r, fit.p_value])
    _write_tsv(
        out / "tables" / "roi.tsv",
        ["roi", "n_left", "n_right", "slope_t", "slope_p", "lr_corr_r", "lr_corr_p"],
        rows,
    )
    click.echo(f"roi: wrote {len(rows)} rows")


@cmd_analyze.command("parcels")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "model_name", required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
def cmd_parcels(out, model_name, labels_path):
    """Per-parcel means and homologous left/right t-tests for one map."""
    smap, _ = load_score_map(out, model_name)
    labels = analysis.read_parcels(labels_path, smap.n_voxels)
    rows = analysis.parcel_summary(smap, labels)
    _write_tsv(
        out / "tables" / f"parcels_{model_name}.tsv",
        ["parcel_id", "name", "n_left", "n_right", "mean_left", "mean_right", "diff", "t", "p"],
        [[r.parcel_id, r.name, r.n_left, r.n_right, r.mean_left, r.mean_right, r.diff, r.t, r.p]
         for r in rows],
    )
    click.echo(f"parcels: wrote {len(rows)} rows for {model_name}")


@cmd_analyze.command("covariate")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", "models_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "only", multiple=True)
@click.option("--name", "covariate", required=True, help="Covariate key in the models manifest.")
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--boot", default=analysis.DEFAULT_N_BOOT, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_covariate(out, models_path, only, covariate, mask_path, boot, seed):
    """Regress mean score on a per-model covariate."""
    entries, maps = _analysis_inputs(out, models_path, only)
    mask = _read_mask_flag(mask_path, maps[0].n_voxels)
    fit = analysis.covariate_fit(entries, maps, covariate, mask, n_boot=boot, seed=seed)
    _write_json(out / "tables" / f"covariate_{covariate}.json", {"fit": fit.to_dict(), "seed": seed})
    click.echo(f"covariate {covariate}: r {fit.r:.3f} p {fit.p_value:.3g}")


@cmd_analyze.command("layers")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--models", "models_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "only", multiple=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
def cmd_layers(out, models_path, only, mask_path):
    """Mean score per layer depth for each model."""
    entries, maps = _analysis_inputs(out, models_path, only)
    mask = _read_mask_flag(mask_path, maps[0].n_voxels)
    rows = []
    for entry, smap in zip(entries, maps):
        profile = analysis.layer_profile(smap, mask)
        for depth, r in zip(profile.depths, profile.mean_r):
            rows.append([entry.name, depth, r])
    _write_tsv(out / "tables" / "layers.tsv", ["model", "relative_depth", "mean_r"], rows)
    click.echo(f"layers: wrote {len(rows)} rows")


@cli.command("report")
@click.option("--out", type=click.Path(exists=True, path_type=Path), required=True)
def cmd_report(out):
    """Consolidate all maps and tables under --out into report.json."""
    maps_dir = out / "maps"
    sidecars = sorted(maps_dir.glob("*.score.json")) if maps_dir.is_dir() else []
    if not sidecars:
        raise InputError(f"no score maps found under {maps_dir}")
    doc: dict = {"maps": {}, "tables": {}}
    summary_rows = []
    for path in sidecars:
        with open(path, encoding="utf-8") as fh:
            sidecar = json.load(fh)
        name = sidecar.get("model", path.stem)
        doc["maps"][name] = sidecar
        summary_rows.append([name, sidecar.get("n_parameters", ""), sidecar.get("mean_r", "")])
    tables_dir = out / "tables"
    if tables_dir.is_dir():
        for path in sorted(tables_dir.glob("*.json")):
            with open(path, encoding="utf-8") as fh:
                doc["tables"][path.stem] = json.load(fh)
    _write_json(out / "report.json", doc)
    _write_tsv(out / "summary.tsv", ["model", "n_parameters", "mean_r"], summary_rows)
    click.echo(f"report: {len(doc['maps'])} maps, {len(doc['tables'])} tables")


def _emit_error(e: Exception) -> None:
    if _JSON_ERRORS:
        doc = {"error": type(e).__name__, "message": str(e)}
        click.echo(json.dumps(doc, sort_keys=True), err=True)
    else:
        click.echo(f"error: {e}", err=True)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.UsageError as e:
        e.show()
        sys.exit(2)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except InputError as e:
        _emit_error(e)
        sys.exit(2)
    except (NumericError, FloatingPointError) as e:
        _emit_error(e)
        sys.exit(3)


if __name__ == "__main__":
    main()
