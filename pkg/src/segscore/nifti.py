"""Minimal single-file NIfTI-1 reader and writer.

Scope is deliberately narrow: magic ``n+1\\0`` single-file volumes, four
datatypes (uint8, int16, float32, float64), 3D payloads. Both byte orders
are readable (detected via ``sizeof_hdr == 348``); output is always
little-endian. Header fields this library does not interpret are carried
through a read/write round trip verbatim (canonicalised to little-endian),
so orientation metadata written by other tools is not destroyed.
"""

from __future__ import annotations

import struct
from os import PathLike
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import FormatError
from .volume import SUPPORTED_DTYPES, Volume, VolumeHeader

HEADER_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
DEFAULT_VOX_OFFSET = 352  # header + 4-byte extender flag

# Full nifti_1_header layout, in order. Struct has no padding at standard
# size, so offsets follow from the field sizes alone.
_HEADER_FIELDS = (
    ("sizeof_hdr", "i"),
    ("data_type", "10s"),
    ("db_name", "18s"),
    ("extents", "i"),
    ("session_error", "h"),
    ("regular", "c"),
    ("dim_info", "c"),
    ("dim", "8h"),
    ("intent_p1", "f"),
    ("intent_p2", "f"),
    ("intent_p3", "f"),
    ("intent_code", "h"),
    ("datatype", "h"),
    ("bitpix", "h"),
    ("slice_start", "h"),
    ("pixdim", "8f"),
    ("vox_offset", "f"),
    ("scl_slope", "f"),
    ("scl_inter", "f"),
    ("slice_end", "h"),
    ("slice_code", "c"),
    ("xyzt_units", "c"),
    ("cal_max", "f"),
    ("cal_min", "f"),
    ("slice_duration", "f"),
    ("toffset", "f"),
    ("glmax", "i"),
    ("glmin", "i"),
    ("descrip", "80s"),
    ("aux_file", "24s"),
    ("qform_code", "h"),
    ("sform_code", "h"),
    ("quatern_b", "f"),
    ("quatern_c", "f"),
    ("quatern_d", "f"),
    ("qoffset_x", "f"),
    ("qoffset_y", "f"),
    ("qoffset_z", "f"),
    ("srow_x", "4f"),
    ("srow_y", "4f"),
    ("srow_z", "4f"),
    ("intent_name", "16s"),
    ("magic", "4s"),
)
_STRUCT_BODY = "".join(fmt for _, fmt in _HEADER_FIELDS)
assert struct.calcsize("<" + _STRUCT_BODY) == HEADER_SIZE

# datatype code <-> name, with required bitpix
_DT_CODE_TO_NAME = {2: "uint8", 4: "int16", 16: "float32", 64: "float64"}
_DT_NAME_TO_CODE = {v: k for k, v in _DT_CODE_TO_NAME.items()}
_DT_BITPIX = {"uint8": 8, "int16": 16, "float32": 32, "float64": 64}

Source = Union[bytes, bytearray, memoryview, BinaryIO, str, PathLike]


def _unpack_header(raw: bytes, order: str) -> dict:
    values = struct.unpack(order + _STRUCT_BODY, raw)
    fields: dict = {}
    pos = 0
    for name, fmt in _HEADER_FIELDS:
        n = int(fmt[:-1]) if len(fmt) > 1 and fmt[-1] in "hf" else 1
        if n == 1:
            fields[name] = values[pos]
        else:
            fields[name] = tuple(values[pos : pos + n])
        pos += n
    return fields


def _pack_header(fields: dict) -> bytes:
    flat: list = []
    for name, fmt in _HEADER_FIELDS:
        v = fields[name]
        if isinstance(v, tuple):
            flat.extend(v)
        else:
            flat.append(v)
    return struct.pack("<" + _STRUCT_BODY, *flat)


def _as_bytes(source: Source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, PathLike)):
        return Path(source).read_bytes()
    return source.read()


def read_nifti(source: Source) -> Volume:
    """Parse a single-file NIfTI-1 byte stream into a :class:`Volume`.

    Accepts raw bytes, a binary file object, or a path. Scale slope and
    intercept are applied on read (promoting to float64 when they change
    values), so the returned volume is always in physical units with
    slope 1 / intercept 0.
    """
    blob = _as_bytes(source)
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"bad magic/header: stream is {len(blob)} bytes, "
                          f"need at least {HEADER_SIZE}")

    if struct.unpack_from("<i", blob)[0] == HEADER_SIZE:
        order = "<"
    elif struct.unpack_from(">i", blob)[0] == HEADER_SIZE:
        order = ">"
    else:
        raise FormatError("bad magic/header: sizeof_hdr is not 348 in either byte order")

    h = _unpack_header(blob[:HEADER_SIZE], order)

    if h["magic"] == MAGIC_PAIR:
        raise FormatError("two-file .hdr/.img NIfTI is not supported (magic 'ni1')")
    if h["magic"] != MAGIC_SINGLE:
        raise FormatError(f"bad magic {h['magic']!r}; expected {MAGIC_SINGLE!r}")

    ndim = h["dim"][0]
    if not 1 <= ndim <= 7:
        raise FormatError(f"bad magic/header: dim[0] = {ndim} outside 1..7")
    declared = h["dim"][1 : ndim + 1]
    if any(d < 1 for d in declared):
        raise FormatError(f"non-positive dimension in dim[1..{ndim}] = {declared}")
    if any(d != 1 for d in declared[3:]):
        raise FormatError(f"dimensions beyond the third must be 1, got dim = {declared}")
    dims = tuple(int(d) for d in declared[:3]) + (1,) * max(0, 3 - len(declared))

    code = h["datatype"]
    if code not in _DT_CODE_TO_NAME:
        raise FormatError(f"unsupported datatype code {code}")
    dtname = _DT_CODE_TO_NAME[code]
    if h["bitpix"] != _DT_BITPIX[dtname]:
        raise FormatError(
            f"bitpix {h['bitpix']} does not match datatype {dtname} "
            f"(expected {_DT_BITPIX[dtname]})"
        )

    # pixdim entries for declared axes must be positive; absent axes default to 1mm
    spacing = tuple(
        float(h["pixdim"][axis]) if axis <= ndim else 1.0 for axis in range(1, 4)
    )
    if any(s <= 0 for s in spacing):
        raise FormatError(f"non-positive voxel spacing pixdim[1..3] = {spacing}")

    offset = int(h["vox_offset"])
    if offset < HEADER_SIZE:
        raise FormatError(f"vox_offset {h['vox_offset']} precedes end of header")

    np_dtype = np.dtype(SUPPORTED_DTYPES[dtname]).newbyteorder(order)
    count = int(np.prod(dims))
    nbytes = count * np_dtype.itemsize
    if offset + nbytes > len(blob):
        raise FormatError(
            f"declared data size exceeds stream: need {offset + nbytes} bytes, "
            f"have {len(blob)}"
        )

    flat = np.frombuffer(blob, dtype=np_dtype, count=count, offset=offset)
    data = flat.astype(flat.dtype.newbyteorder("=")).reshape(dims, order="F")

    slope = float(h["scl_slope"])
    inter = float(h["scl_inter"])
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        data = data.astype(np.float64) * slope + inter
        dtname = "float64"

    # Canonicalise the preserved header to little-endian and to the state the
    # in-memory volume is actually in (scaling applied, single file).
    h["scl_slope"] = 1.0
    h["scl_inter"] = 0.0
    h["datatype"] = _DT_NAME_TO_CODE[dtname]
    h["bitpix"] = _DT_BITPIX[dtname]
    raw = _pack_header(h)

    header = VolumeHeader(
        dims=dims,
        datatype=dtname,
        voxel_spacing=spacing,
        scale_slope=1.0,
        scale_intercept=0.0,
        raw=raw,
    )
    return Volume(header=header, data=data)


def write_nifti(volume: Volume, sink: Union[BinaryIO, str, PathLike, None] = None) -> bytes:
    """Serialise a volume as little-endian single-file NIfTI-1 bytes.

    No rescaling is applied: the payload is the volume's data verbatim and
    the header carries slope 1 / intercept 0, so ``read_nifti`` of the
    output reproduces the volume exactly. Returns the bytes; also writes
    them to ``sink`` when given.
    """
    dims = volume.header.dims
    if any(d > 32767 for d in dims):
        raise FormatError(f"dimension {max(dims)} exceeds the format's 16-bit dim field")

    dtname = volume.header.datatype
    np_dtype = np.dtype(SUPPORTED_DTYPES[dtname]).newbyteorder("<")
    payload = np.asarray(volume.data, dtype=np_dtype).ravel(order="F").tobytes()

    h = _unpack_header(volume.header.raw, "<")
    h["sizeof_hdr"] = HEADER_SIZE
    h["dim"] = (3, dims[0], dims[1], dims[2], 1, 1, 1, 1)
    h["datatype"] = _DT_NAME_TO_CODE[dtname]
    h["bitpix"] = _DT_BITPIX[dtname]
    pixdim = list(h["pixdim"])
    pixdim[1:4] = [float(s) for s in volume.header.voxel_spacing]
    h["pixdim"] = tuple(pixdim)
    h["vox_offset"] = float(DEFAULT_VOX_OFFSET)
    h["scl_slope"] = 1.0
    h["scl_inter"] = 0.0
    h["magic"] = MAGIC_SINGLE

    blob = _pack_header(h) + bytes(4) + payload
    if sink is not None:
        if isinstance(sink, (str, PathLike)):
            Path(sink).write_bytes(blob)
        else:
            sink.write(blob)
    return blob


def read_nifti_file(path: Union[str, PathLike]) -> Volume:
    """Read a volume from ``path`` (thin convenience over :func:`read_nifti`)."""
    with open(path, "rb") as f:
        return read_nifti(f)


def write_nifti_file(volume: Volume, path: Union[str, PathLike]) -> None:
    with open(path, "wb") as f:
        write_nifti(volume, f)


def volume_from_array(data: np.ndarray, datatype: str | None = None,
                      voxel_spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> Volume:
    """Wrap a 3D array in a Volume with a fresh canonical header."""
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise FormatError(f"expected a 3D array, got shape {arr.shape}")
    if datatype is None:
        datatype = arr.dtype.name if arr.dtype.name in SUPPORTED_DTYPES else "float64"
    header = VolumeHeader(dims=arr.shape, datatype=datatype, voxel_spacing=voxel_spacing)
    return Volume(header=header, data=arr.astype(SUPPORTED_DTYPES[datatype]))


__all__ = [
    "read_nifti",
    "write_nifti",
    "read_nifti_file",
    "write_nifti_file",
    "volume_from_array",
    "HEADER_SIZE",
    "MAGIC_SINGLE",
]
