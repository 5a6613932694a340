"""Readers and writers for every on-disk artifact used by the toolkit.

Formats
-------
- Matrix files: NPY version 1.0, restricted to 2-D, C-order, little-endian
  float32/float64.  The restriction keeps readers total: anything else is a
  typed error, never a crash.  Files written here are byte-identical to what
  ``numpy.save`` produces for the same array.
- Event files: UTF-8 TSV with header ``word<TAB>onset[<TAB>duration]``.
- Voxel geometry: TSV with columns voxel_id, x_mm, y_mm, z_mm (MNI mm).
- Masks: TSV with a single voxel_id column.
- Study / model manifests: JSON with ``"schema": 1`` and a ``"kind"`` field.

All functions are pure per-file and safe to call concurrently on distinct
paths.
"""

from __future__ import annotations

import ast
import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
HEADER_ALIGN = 64
SUPPORTED_DESCRS = ("<f4", "<f8")
MANIFEST_SCHEMA = 1


class MatrixIOError(InputError):
    """Base class for matrix container errors."""


class BadMagicError(MatrixIOError):
    """File does not start with the NPY magic/version bytes."""


class BadHeaderError(MatrixIOError):
    """Header dict is malformed or violates the 2-D C-order restriction."""


class UnsupportedDtypeError(MatrixIOError):
    """dtype tag is not little-endian float32/float64."""


class TruncatedPayloadError(MatrixIOError):
    """Payload is shorter than the header-declared shape requires."""


class TrailingBytesError(MatrixIOError):
    """Payload is longer than the header-declared shape requires."""


class NonFiniteError(MatrixIOError):
    """Matrix contains NaN/Inf and ``allow_nonfinite`` was not set."""


class EventFileError(InputError):
    """Malformed event TSV."""


class GeometryError(InputError):
    """Malformed voxel geometry TSV."""


class MaskFileError(InputError):
    """Malformed mask TSV."""


class ManifestError(InputError):
    """Manifest JSON violates the documented schema."""


# ---------------------------------------------------------------------------
# matrices


def _format_header(shape: tuple[int, int], descr: str) -> bytes:
    head = "{'descr': %r, 'fortran_order': False, 'shape': (%d, %d), }" % (
        descr,
        shape[0],
        shape[1],
    )
    raw = head.encode("latin1")
    # magic(6) + version(2) + hlen(2) + header must be a multiple of 64,
    # with the final byte a newline.
    total = len(MAGIC) + len(VERSION) + 2 + len(raw) + 1
    pad = (-total) % HEADER_ALIGN
    return raw + b" " * pad + b"\n"


def write_matrix(path: str | Path, matrix: np.ndarray, *, allow_nonfinite: bool = False) -> None:
    """Write a 2-D float32/float64 array in the documented NPY 1.0 layout."""
    a = np.asarray(matrix)
    if a.ndim != 2:
        raise BadHeaderError(f"only 2-D matrices are supported, got ndim={a.ndim}")
    if a.dtype not in (np.float32, np.float64):
        raise UnsupportedDtypeError(f"unsupported dtype {a.dtype}, expected float32/float64")
    if not allow_nonfinite and not np.isfinite(a).all():
        raise NonFiniteError(f"refusing to write non-finite values to {path}")
    descr = "<f4" if a.dtype == np.float32 else "<f8"
    header = _format_header(a.shape, descr)
    payload = np.ascontiguousarray(a, dtype=np.dtype(descr)).tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(VERSION)
        fh.write(struct.pack("<H", len(header)))
        fh.write(header)
        fh.write(payload)


def read_matrix(path: str | Path, *, allow_nonfinite: bool = False) -> np.ndarray:
    """Read a matrix file, validating magic, header, shape and finiteness.

    Returns a C-contiguous array with the exact dtype from the header;
    ``write_matrix(read_matrix(p))`` reproduces the file byte for byte.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 10 or blob[:6] != MAGIC:
        raise BadMagicError(f"{path}: not a matrix file (bad magic)")
    if blob[6:8] != VERSION:
        raise BadMagicError(f"{path}: unsupported container version {blob[6]}.{blob[7]}")
    (hlen,) = struct.unpack("<H", blob[8:10])
    if len(blob) < 10 + hlen:
        raise BadHeaderError(f"{path}: header truncated")
    raw = blob[10 : 10 + hlen]
    if not raw.endswith(b"\n"):
        raise BadHeaderError(f"{path}: header not newline-terminated")
    try:
        header = ast.literal_eval(raw.decode("latin1"))
    except (ValueError, SyntaxError, MemoryError, RecursionError) as exc:
        raise BadHeaderError(f"{path}: cannot parse header dict: {exc}") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise BadHeaderError(f"{path}: header keys must be descr/fortran_order/shape")
    descr = header["descr"]
    if not isinstance(descr, str) or descr not in SUPPORTED_DESCRS:
        raise UnsupportedDtypeError(
            f"{path}: unsupported dtype tag {descr!r}, expected one of {SUPPORTED_DESCRS}"
        )
    if header["fortran_order"] is not False:
        raise BadHeaderError(f"{path}: fortran_order must be False")
    shape = header["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) != 2
        or not all(isinstance(s, int) and s >= 0 for s in shape)
    ):
        raise BadHeaderError(f"{path}: shape must be a 2-tuple of non-negative ints, got {shape!r}")
    rows, cols = shape
    dtype = np.dtype(descr)
    expected = rows * cols * dtype.itemsize
    payload = blob[10 + hlen :]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, header requires {expected}"
        )
    if len(payload) > expected:
        raise TrailingBytesError(
            f"{path}: payload has {len(payload)} bytes, header requires {expected}"
        )
    a = np.frombuffer(payload, dtype=dtype).reshape(rows, cols).copy()
    if not allow_nonfinite and not np.isfinite(a).all():
        raise NonFiniteError(f"{path}: matrix contains non-finite values")
    return a


# ---------------------------------------------------------------------------
# events


@dataclass
class EventList:
    """Word onsets for one run, in seconds from run start."""

    words: list[str]
    onsets: np.ndarray
    durations: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.words)


def read_events(path: str | Path) -> EventList:
    """Parse an event TSV; onsets must be non-negative and non-decreasing."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise EventFileError(f"{path}: empty file, expected a header row") from None
        if header[:2] != ["word", "onset"]:
            raise EventFileError(f"{path}: header must start with word<TAB>onset, got {header!r}")
        has_duration = len(header) > 2 and header[2] == "duration"
        words: list[str] = []
        onsets: list[float] = []
        durations: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise EventFileError(f"{path}:{lineno}: expected at least 2 columns")
            words.append(row[0])
            try:
                onset = float(row[1])
            except ValueError:
                raise EventFileError(f"{path}:{lineno}: non-numeric onset {row[1]!r}") from None
            if onset < 0:
                raise EventFileError(f"{path}:{lineno}: negative onset {onset}")
            if onsets and onset < onsets[-1]:
                raise EventFileError(
                    f"{path}:{lineno}: onsets must be non-decreasing ({onset} after {onsets[-1]})"
                )
            onsets.append(onset)
            if has_duration and len(row) > 2 and row[2] != "":
                try:
                    durations.append(float(row[2]))
                except ValueError:
                    raise EventFileError(f"{path}:{lineno}: non-numeric duration {row[2]!r}") from None
            elif has_duration:
                durations.append(0.0)
    dur = np.asarray(durations, dtype=float) if has_duration else None
    return EventList(words=words, onsets=np.asarray(onsets, dtype=float), durations=dur)


def write_events(path: str | Path, events: EventList) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        if events.durations is not None:
            writer.writerow(["word", "onset", "duration"])
            for w, o, d in zip(events.words, events.onsets, events.durations):
                writer.writerow([w, format(o, ".6f"), format(d, ".6f")])
        else:
            writer.writerow(["word", "onset"])
            for w, o in zip(events.words, events.onsets):
                writer.writerow([w, format(o, ".6f")])


# ---------------------------------------------------------------------------
# geometry and masks


@dataclass
class VoxelGeometry:
    """MNI-mm coordinates per voxel; row i is voxel_id i (matrix column i)."""

    coords: np.ndarray  # (n_voxels, 3) float64

    def __len__(self) -> int:
        return self.coords.shape[0]

    def grid_spacing(self) -> float:
        """Smallest positive coordinate step, assumed common to all axes."""
        steps = []
        for axis in range(3):
            vals = np.unique(self.coords[:, axis])
            if len(vals) > 1:
                steps.append(np.diff(vals).min())
        if not steps:
            raise GeometryError("cannot infer grid spacing from a degenerate geometry")
        return float(min(steps))


def read_geometry(path: str | Path) -> VoxelGeometry:
    rows: list[tuple[int, float, float, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise GeometryError(f"{path}: empty file") from None
        if header != ["voxel_id", "x_mm", "y_mm", "z_mm"]:
            raise GeometryError(f"{path}: header must be voxel_id/x_mm/y_mm/z_mm, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise GeometryError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                rows.append((int(row[0]), float(row[1]), float(row[2]), float(row[3])))
            except ValueError:
                raise GeometryError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        dup = sorted(i for i in set(ids) if ids.count(i) > 1)[0]
        raise GeometryError(f"{path}: duplicate voxel_id {dup}")
    if ids != list(range(len(ids))):
        raise GeometryError(f"{path}: voxel_id must be contiguous 0..{len(ids) - 1} in order")
    coords = np.asarray([r[1:] for r in rows], dtype=float)
    return VoxelGeometry(coords=coords)


def write_geometry(path: str | Path, geometry: VoxelGeometry) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["voxel_id", "x_mm", "y_mm", "z_mm"])
        for i, (x, y, z) in enumerate(geometry.coords):
            writer.writerow([i, format(x, ".6g"), format(y, ".6g"), format(z, ".6g")])


@dataclass
class Mask:
    """Boolean voxel subset over a fixed geometry."""

    bits: np.ndarray  # (n_voxels,) bool
    label: str = ""

    def __len__(self) -> int:
        return self.bits.shape[0]

    @property
    def n_selected(self) -> int:
        return int(self.bits.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)


def read_mask(path: str | Path, n_voxels: int, label: str = "") -> Mask:
    bits = np.zeros(n_voxels, dtype=bool)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise MaskFileError(f"{path}: empty file") from None
        if header != ["voxel_id"]:
            raise MaskFileError(f"{path}: header must be voxel_id, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vid = int(row[0])
            except ValueError:
                raise MaskFileError(f"{path}:{lineno}: non-integer voxel_id {row[0]!r}") from None
            if not 0 <= vid < n_voxels:
                raise MaskFileError(f"{path}:{lineno}: voxel_id {vid} out of range 0..{n_voxels - 1}")
            bits[vid] = True
    return Mask(bits=bits, label=label or Path(path).stem)


def write_mask(path: str | Path, mask: Mask) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("voxel_id\n")
        for vid in mask.indices():
            fh.write(f"{vid}\n")


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunEntry:
    run_id: int
    bold_path: str
    events_path: str
    n_scans: int


@dataclass
class StudyManifest:
    tr: float
    trim_seconds: float
    runs: list[RunEntry]
    # subject_id -> run_id -> bold path (per-subject data, used by isc and
    # by the averaging pipeline; absent for pre-averaged studies)
    subjects: dict[str, dict[int, str]] = field(default_factory=dict)
    geometry_path: str = ""

    @property
    def run_ids(self) -> list[int]:
        return [r.run_id for r in self.runs]


@dataclass
class ModelEntry:
    name: str
    family: str
    n_parameters: int
    n_layers: int
    n_neurons: int
    # run_id -> ordered per-layer feature paths (n_layers + 1 entries,
    # embedding layer first)
    layer_feature_paths: dict[int, list[str]]
    covariates: dict[str, float] = field(default_factory=dict)
    checkpoint: str = ""


@dataclass
class ModelManifest:
    models: list[ModelEntry]

    def __iter__(self):
        return iter(self.models)

    def get(self, name: str) -> ModelEntry:
        for m in self.models:
            if m.name == name:
                return m
        raise ManifestError(f"model {name!r} not in manifest")


def _need(obj: dict, key: str, types, where: str):
    if key not in obj:
        raise ManifestError(f"{where}.{key}: missing required field")
    val = obj[key]
    if not isinstance(val, types):
        tn = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ManifestError(f"{where}.{key}: expected {tn}, got {type(val).__name__}")
    return val


def _parse_study(doc: dict, path: str) -> StudyManifest:
    tr = float(_need(doc, "tr", (int, float), "$"))
    if tr <= 0:
        raise ManifestError(f"$.tr: must be positive, got {tr}")
    trim = float(_need(doc, "trim_seconds", (int, float), "$"))
    runs_doc = _need(doc, "runs", list, "$")
    runs: list[RunEntry] = []
    for i, rd in enumerate(runs_doc):
        where = f"$.runs[{i}]"
        if not isinstance(rd, dict):
            raise ManifestError(f"{where}: expected object")
        runs.append(
            RunEntry(
                run_id=_need(rd, "run_id", int, where),
                bold_path=_need(rd, "bold_path", str, where),
                events_path=_need(rd, "events_path", str, where),
                n_scans=_need(rd, "n_scans", int, where),
            )
        )
    if len({r.run_id for r in runs}) != len(runs):
        raise ManifestError("$.runs: duplicate run_id")
    subjects: dict[str, dict[int, str]] = {}
    for sid, runs_map in doc.get("subjects", {}).items():
        if not isinstance(runs_map, dict):
            raise ManifestError(f"$.subjects.{sid}: expected object mapping run_id to path")
        subjects[sid] = {}
        for rid, p in runs_map.items():
            if not isinstance(p, str):
                raise ManifestError(f"$.subjects.{sid}.{rid}: expected path string")
            subjects[sid][int(rid)] = p
    return StudyManifest(
        tr=tr,
        trim_seconds=trim,
        runs=runs,
        subjects=subjects,
        geometry_path=doc.get("geometry_path", ""),
    )


def _parse_models(doc: dict, path: str) -> ModelManifest:
    models_doc = _need(doc, "models", list, "$")
    models: list[ModelEntry] = []
    for i, md in enumerate(models_doc):
        where = f"$.models[{i}]"
        if not isinstance(md, dict):
            raise ManifestError(f"{where}: expected object")
        n_parameters = _need(md, "n_parameters", int, where)
        if n_parameters <= 0:
            raise ManifestError(f"{where}.n_parameters: must be positive, got {n_parameters}")
        n_layers = _need(md, "n_layers", int, where)
        paths_doc = _need(md, "layer_feature_paths", dict, where)
        layer_feature_paths: dict[int, list[str]] = {}
        for rid, paths in paths_doc.items():
            pwhere = f"{where}.layer_feature_paths.{rid}"
            if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
                raise ManifestError(f"{pwhere}: expected list of path strings")
            if len(paths) != n_layers + 1:
                raise ManifestError(
                    f"{pwhere}: expected {n_layers + 1} per-layer files "
                    f"(embedding layer included), got {len(paths)}"
                )
            layer_feature_paths[int(rid)] = list(paths)
        covariates = md.get("covariates", {})
        if not isinstance(covariates, dict):
            raise ManifestError(f"{where}.covariates: expected object")
        models.append(
            ModelEntry(
                name=_need(md, "name", str, where),
                family=_need(md, "family", str, where),
                n_parameters=n_parameters,
                n_layers=n_layers,
                n_neurons=_need(md, "n_neurons", int, where),
                layer_feature_paths=layer_feature_paths,
                covariates={k: float(v) for k, v in covariates.items()},
                checkpoint=md.get("checkpoint", ""),
            )
        )
    if len({m.name for m in models}) != len(models):
        raise ManifestError("$.models: duplicate model name")
    return ModelManifest(models=models)


def read_manifest(path: str | Path) -> StudyManifest | ModelManifest:
    """Read a study or model manifest; dispatch on the ``kind`` field."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be an object")
    schema = doc.get("schema")
    if schema != MANIFEST_SCHEMA:
        raise ManifestError(f"{path}: $.schema: expected {MANIFEST_SCHEMA}, got {schema!r}")
    kind = doc.get("kind")
    if kind == "study":
        return _parse_study(doc, str(path))
    if kind == "models":
        return _parse_models(doc, str(path))
    raise ManifestError(f"{path}: $.kind: expected 'study' or 'models', got {kind!r}")


def write_study_manifest(path: str | Path, manifest: StudyManifest) -> None:
    doc = {
        "schema": MANIFEST_SCHEMA,
        "kind": "study",
        "tr": manifest.tr,
        "trim_seconds": manifest.trim_seconds,
        "geometry_path": manifest.geometry_path,
        "runs": [
            {
                "run_id": r.run_id,
                "bold_path": r.bold_path,
                "events_path": r.events_path,
                "n_scans": r.n_scans,
            }
            for r in manifest.runs
        ],
    }
    if manifest.subjects:
        doc["subjects"] = {
            sid: {str(rid): p for rid, p in runs.items()}
            for sid, runs in manifest.subjects.items()
        }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_model_manifest(path: str | Path, manifest: ModelManifest) -> None:
    doc = {
        "schema": MANIFEST_SCHEMA,
        "kind": "models",
        "models": [
            {
                "name": m.name,
                "family": m.family,
                "n_parameters": m.n_parameters,
                "n_layers": m.n_layers,
                "n_neurons": m.n_neurons,
                "layer_feature_paths": {str(k): v for k, v in m.layer_feature_paths.items()},
                "covariates": m.covariates,
                "checkpoint": m.checkpoint,
            }
            for m in manifest.models
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
