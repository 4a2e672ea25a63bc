"""Minimal NIfTI-1 reader/writer.

Supports uncompressed single-file .nii only (magic "n+1"), datatypes
uint8/int16/int32/float32/float64, 3-D shapes, both byte orders on read.
Data are stored x-fastest (Fortran order) per the NIfTI standard and
returned as float64 arrays of shape (X, Y, Z) with the scl_slope /
scl_inter scaling applied (slope 0 is treated as 1; the intercept is
always added). Written files are little-endian with slope 1, inter 0.

Header field offsets follow the nifti1.h reference layout; the full
byte-exact contract lives in docs/formats.md.
"""

import struct

import numpy as np

from .errors import DataError

HDR_SIZE = 348
MAGIC_OFFSET = 344
_DTYPES = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}
_DTYPE_CODES = {np.dtype(v).str[1:]: k for k, v in _DTYPES.items()}


def read_nifti(path):
    """Parse a .nii file. Returns (volume float64 (X,Y,Z), voxdim (3,))."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < HDR_SIZE:
        raise DataError(f"{path}: file shorter than a NIfTI-1 header")
    (sizeof_hdr_le,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr_le == HDR_SIZE:
        bo = "<"
    else:
        (sizeof_hdr_be,) = struct.unpack_from(">i", raw, 0)
        if sizeof_hdr_be != HDR_SIZE:
            raise DataError(f"{path}: sizeof_hdr is {sizeof_hdr_le} (LE) / "
                            f"{sizeof_hdr_be} (BE), expected {HDR_SIZE}")
        bo = ">"
    magic = raw[MAGIC_OFFSET:MAGIC_OFFSET + 4]
    if magic[:3] != b"n+1":
        raise DataError(f"{path}: bad magic {magic!r}, expected 'n+1' single-file")
    dim = struct.unpack_from(bo + "8h", raw, 40)
    ndim = dim[0]
    if ndim < 3 or any(d != 1 for d in dim[4:4 + max(ndim - 3, 0)]):
        raise DataError(f"{path}: expected a 3-D volume, dim={dim}")
    shape = tuple(int(d) for d in dim[1:4])
    if min(shape) < 1:
        raise DataError(f"{path}: non-positive dimensions {shape}")
    (datatype,) = struct.unpack_from(bo + "h", raw, 70)
    if datatype not in _DTYPES:
        raise DataError(f"{path}: unsupported datatype code {datatype}")
    pixdim = struct.unpack_from(bo + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(bo + "f", raw, 108)
    (scl_slope,) = struct.unpack_from(bo + "f", raw, 112)
    (scl_inter,) = struct.unpack_from(bo + "f", raw, 116)
    offset = int(round(vox_offset))
    if offset < HDR_SIZE:
        raise DataError(f"{path}: vox_offset {vox_offset} inside the header")
    dt = np.dtype(bo + _DTYPES[datatype])
    count = int(np.prod(shape))
    need = offset + count * dt.itemsize
    if len(raw) < need:
        raise DataError(f"{path}: truncated data section "
                        f"({len(raw)} bytes, need {need})")
    flat = np.frombuffer(raw, dtype=dt, count=count, offset=offset)
    vol = flat.reshape(shape, order="F").astype(np.float64)
    slope = float(scl_slope) if scl_slope != 0.0 else 1.0
    vol = vol * slope + float(scl_inter)
    voxdim = tuple(float(p) for p in pixdim[1:4])
    return vol, voxdim


def write_nifti(path, vol, voxdim=(1.0, 1.0, 1.0), dtype="f8"):
    """Write a 3-D array as little-endian single-file .nii."""
    vol = np.asarray(vol)
    if vol.ndim != 3:
        raise DataError(f"expected a 3-D volume, got shape {vol.shape}")
    code = _DTYPE_CODES.get(np.dtype(dtype).str[1:])
    if code is None:
        raise DataError(f"unsupported write dtype {dtype}")
    dt = np.dtype("<" + _DTYPES[code])
    hdr = bytearray(HDR_SIZE)
    struct.pack_into("<i", hdr, 0, HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *vol.shape, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, code)
    struct.pack_into("<h", hdr, 72, dt.itemsize * 8)  # bitpix
    struct.pack_into("<8f", hdr, 76, 1.0, *voxdim, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", hdr, 108, 352.0)  # vox_offset
    struct.pack_into("<f", hdr, 112, 1.0)    # scl_slope
    struct.pack_into("<f", hdr, 116, 0.0)    # scl_inter
    hdr[MAGIC_OFFSET:MAGIC_OFFSET + 4] = b"n+1\x00"
    data = np.asfortranarray(vol.astype(dt))
    with open(path, "wb") as f:
        f.write(hdr)
        f.write(b"\x00\x00\x00\x00")  # pad to vox_offset 352
        f.write(data.tobytes(order="F"))
