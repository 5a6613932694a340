"""Minimal NIfTI-1 reader and BOLD-to-matrix conversion.

Only what conversion needs: single-file ``.nii`` / ``.nii.gz``, the common
numeric datatypes, slope/intercept scaling, and the affine (sform when set,
else qform).  Extension blocks are skipped by honoring ``vox_offset``.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

_HEADER_SIZE = 348
_MAGICS = (b"n+1\x00", b"ni1\x00")
_DTYPES = {
    2: "u1",
    4: "i2",
    8: "i4",
    16: "f4",
    64: "f8",
    256: "i1",
    512: "u2",
    768: "u4",
}


@dataclass(frozen=True)
class VoxelGeometry:
    """World coordinates (mm) per kept voxel, row order matching the matrix."""

    coords: np.ndarray  # (n_voxels, 3) float64


def _read_bytes(path: Path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _quaternion_rotation(b: float, c: float, d: float) -> np.ndarray:
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 0 else 0.0
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


def read_volume(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a NIfTI-1 file as ``(data, affine)``.

    ``data`` is float64 with shape ``(nx, ny, nz, nt)`` (``nt`` is 1 for a
    3-D image) and has slope/intercept scaling already applied.  ``affine``
    maps homogeneous voxel indices to mm.  A file that defines neither sform
    nor qform fails with "affine missing".
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"volume not found: {path}")
    raw = _read_bytes(path)
    if len(raw) < _HEADER_SIZE + 4:
        raise InputError(f"truncated NIfTI header: {path}")

    for bo in ("<", ">"):
        if struct.unpack_from(bo + "i", raw, 0)[0] == _HEADER_SIZE:
            break
    else:
        raise InputError(f"not a NIfTI-1 file (bad sizeof_hdr): {path}")
    magic = raw[344:348]
    if magic not in _MAGICS:
        raise InputError(f"not a NIfTI-1 file (bad magic {magic!r}): {path}")

    dim = struct.unpack_from(bo + "8h", raw, 40)
    datatype = struct.unpack_from(bo + "h", raw, 70)[0]
    pixdim = struct.unpack_from(bo + "8f", raw, 76)
    vox_offset = struct.unpack_from(bo + "f", raw, 108)[0]
    scl_slope, scl_inter = struct.unpack_from(bo + "2f", raw, 112)
    qform_code, sform_code = struct.unpack_from(bo + "2h", raw, 252)
    quatern = struct.unpack_from(bo + "3f", raw, 256)
    qoffset = struct.unpack_from(bo + "3f", raw, 268)
    srow = np.array(struct.unpack_from(bo + "12f", raw, 280), dtype=np.float64)

    ndim = dim[0]
    if ndim not in (3, 4):
        raise InputError(f"expected a 3-D or 4-D image, got dim[0]={ndim}: {path}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    nt = dim[4] if ndim == 4 else 1
    if min(nx, ny, nz, nt) < 1:
        raise InputError(f"bad image dimensions {dim[1:5]}: {path}")
    if datatype not in _DTYPES:
        raise InputError(f"unsupported NIfTI datatype {datatype}: {path}")

    dtype = np.dtype(bo + _DTYPES[datatype])
    count = nx * ny * nz * nt
    offset = int(round(vox_offset))
    if offset < _HEADER_SIZE or len(raw) < offset + count * dtype.itemsize:
        raise InputError(f"truncated voxel data: {path}")
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    # NIfTI stores x fastest, so the on-disk order is Fortran
    data = flat.reshape((nx, ny, nz, nt), order="F").astype(np.float64)
    # slope 0 means "no scaling stored"; identity scaling is skipped
    if (
        np.isfinite(scl_slope)
        and np.isfinite(scl_inter)
        and scl_slope != 0.0
        and (scl_slope, scl_inter) != (1.0, 0.0)
    ):
        data = data * float(scl_slope) + float(scl_inter)

    affine = np.eye(4)
    if sform_code > 0:
        affine[:3, :] = srow.reshape(3, 4)
    elif qform_code > 0:
        qfac = -1.0 if pixdim[0] < 0 else 1.0
        rot = _quaternion_rotation(*quatern)
        affine[:3, 0] = rot[:, 0] * pixdim[1]
        affine[:3, 1] = rot[:, 1] * pixdim[2]
        affine[:3, 2] = rot[:, 2] * pixdim[3] * qfac
        affine[:3, 3] = qoffset
    else:
        raise InputError(f"affine missing (no sform or qform): {path}")
    return data, affine


def convert_nifti(
    bold_path: str | Path, mask: str | Path | np.ndarray
) -> tuple[np.ndarray, VoxelGeometry]:
    """Flatten a 4-D BOLD image to ``(n_scans, n_voxels)`` under a mask.

    ``mask`` is a 3-D array or the path of a NIfTI image on the same grid;
    nonzero entries keep the voxel.  Columns follow lexicographic
    ``(x, y, z)`` index order, and the returned geometry holds each kept
    voxel's mm coordinates from the image affine.
    """
    data, affine = read_volume(bold_path)
    grid = data.shape[:3]
    if isinstance(mask, (str, Path)):
        mask_data, _ = read_volume(mask)
        if mask_data.shape[3] != 1:
            raise InputError(f"mask must be 3-D, got shape {mask_data.shape}")
        mask_array = mask_data[..., 0]
    else:
        mask_array = np.asarray(mask)
    if mask_array.shape != grid:
        raise InputError(
            f"mask/volume mismatch: mask grid {mask_array.shape}, "
            f"volume grid {grid}"
        )
    index = np.argwhere(mask_array != 0)
    if index.shape[0] == 0:
        raise InputError("mask selects no voxels")
    matrix = np.ascontiguousarray(data[index[:, 0], index[:, 1], index[:, 2], :].T)
    homogeneous = np.column_stack([index.astype(np.float64), np.ones(len(index))])
    coords = (affine @ homogeneous.T).T[:, :3]
    return matrix, VoxelGeometry(coords=np.ascontiguousarray(coords))
