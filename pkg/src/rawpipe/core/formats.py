"""Binary PGM/PPM image files and the FTEN tensor container.

Raw Bayer frames are P5 files whose header carries a metadata comment::

    P5
    # RAWPIPE CFA=RGGB BITDEPTH=12
    <width> <height>
    <2**b - 1>

RGB images are P6 with maxval 255 or 65535. Bit depths other than 8 and 16
are stored with maxval 65535 and the comment ``# RAWPIPE BITDEPTH=<b>`` so
the round trip is lossless. Samples wider than one byte are big-endian.

FTEN layout: ``b"FTEN"``, version 0x01, dtype byte (0 = float32,
1 = float64), ndim byte, ndim little-endian u64 extents, then row-major
little-endian payload.
"""
from __future__ import annotations

import os
import re
import struct

import numpy as np

from ..errors import EncodingError, ParseError
from .images import CFA_PATTERNS, BayerImage, RgbImage, adc_max

_WS = b" \t\r\n"
_META_RE = re.compile(rb"RAWPIPE((?:\s+[A-Z]+=[A-Za-z0-9]+)*)")

FTEN_MAGIC = b"FTEN"
FTEN_VERSION = 1
_FTEN_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def _parse_header(buf: bytes, magic: bytes, nfields: int):
    """Parse a netpbm header; return (fields, metadata dict, payload offset)."""
    if buf[:2] != magic:
        raise ParseError(f"expected magic {magic.decode()}", 0)
    pos = 2
    fields = []
    meta = {}
    n = len(buf)
    while len(fields) < nfields:
        if pos >= n:
            raise ParseError("truncated header", pos)
        ch = buf[pos : pos + 1]
        if ch in (b" ", b"\t", b"\r", b"\n"):
            pos += 1
        elif ch == b"#":
            end = buf.find(b"\n", pos)
            if end < 0:
                raise ParseError("unterminated comment", pos)
            m = _META_RE.search(buf[pos + 1 : end])
            if m:
                for item in m.group(1).split():
                    key, _, value = item.partition(b"=")
                    meta[key.decode()] = value.decode()
            pos = end + 1
        else:
            start = pos
            while pos < n and buf[pos : pos + 1] not in (b" ", b"\t", b"\r", b"\n", b"#"):
                pos += 1
            token = buf[start:pos]
            if not token.isdigit():
                raise ParseError(f"expected a decimal integer, got {token[:16]!r}", start)
            fields.append((int(token), start))
    if pos >= n or buf[pos : pos + 1] not in (b" ", b"\t", b"\r", b"\n"):
        raise ParseError("missing whitespace after maxval", pos)
    return fields, meta, pos + 1


def _read_samples(buf, offset, count, maxval):
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = count * dtype.itemsize
    if len(buf) - offset < need:
        raise ParseError(f"truncated payload: need {need} bytes, have {len(buf) - offset}", len(buf))
    if len(buf) - offset > need:
        raise ParseError("trailing bytes after payload", offset + need)
    return np.frombuffer(buf, dtype=dtype, count=count, offset=offset).astype(np.uint16)


def _bit_depth_for_maxval(maxval, offset):
    b = maxval.bit_length()
    if maxval != adc_max(b) or not 8 <= b <= 16:
        raise ParseError(f"unsupported maxval {maxval}", offset)
    return b


def parse_pgm(buf: bytes) -> BayerImage:
    fields, meta, offset = _parse_header(buf, b"P5", 3)
    (w, _), (h, h_off), (maxval, mv_off) = fields
    bit_depth = _bit_depth_for_maxval(maxval, mv_off)
    if "BITDEPTH" in meta and int(meta["BITDEPTH"]) != bit_depth:
        raise ParseError(f"BITDEPTH={meta['BITDEPTH']} disagrees with maxval {maxval}", mv_off)
    pattern = meta.get("CFA", "RGGB").upper()
    if pattern not in CFA_PATTERNS:
        raise ParseError(f"unknown CFA pattern {pattern!r}", 2)
    if w == 0 or h == 0 or w % 2 or h % 2:
        raise ParseError(f"Bayer dimensions must be even, got {w}x{h}", h_off)
    data = _read_samples(buf, offset, w * h, maxval).reshape(h, w)
    if data.max(initial=0) > maxval:
        raise ParseError("sample exceeds maxval", offset)
    return BayerImage(data, bit_depth, pattern)


def parse_ppm(buf: bytes) -> RgbImage:
    fields, meta, offset = _parse_header(buf, b"P6", 3)
    (w, _), (h, _), (maxval, mv_off) = fields
    if maxval not in (255, 65535):
        raise ParseError(f"unsupported maxval {maxval}", mv_off)
    bit_depth = 8 if maxval == 255 else 16
    if "BITDEPTH" in meta:
        declared = int(meta["BITDEPTH"])
        if not 8 <= declared <= 16 or (declared == 8) != (maxval == 255):
            raise ParseError(f"BITDEPTH={declared} inconsistent with maxval {maxval}", mv_off)
        bit_depth = declared
    if w == 0 or h == 0:
        raise ParseError("empty image", mv_off)
    data = _read_samples(buf, offset, w * h * 3, maxval).reshape(h, w, 3)
    if data.max(initial=0) > adc_max(bit_depth):
        raise ParseError(f"sample exceeds {bit_depth}-bit range", offset)
    return RgbImage(np.ascontiguousarray(data.transpose(2, 0, 1)), bit_depth)


def pgm_bytes(img: BayerImage) -> bytes:
    maxval = adc_max(img.bit_depth)
    header = (
        f"P5\n# RAWPIPE CFA={img.pattern} BITDEPTH={img.bit_depth}\n"
        f"{img.width} {img.height}\n{maxval}\n"
    ).encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    return header + img.data.astype(dtype).tobytes()


def ppm_bytes(img: RgbImage) -> bytes:
    if img.unit_real:
        raise EncodingError("PPM holds integer codes; quantize unit-real images first")
    maxval = 255 if img.bit_depth == 8 else 65535
    header = f"P6\n# RAWPIPE BITDEPTH={img.bit_depth}\n{img.width} {img.height}\n{maxval}\n"
    dtype = "u1" if maxval == 255 else ">u2"
    payload = img.planes.transpose(1, 2, 0).astype(dtype).tobytes()
    return header.encode("ascii") + payload


def load_pgm(path) -> BayerImage:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def save_pgm(path, img: BayerImage) -> None:
    _write_atomic(path, pgm_bytes(img))


def load_ppm(path) -> RgbImage:
    with open(path, "rb") as fh:
        return parse_ppm(fh.read())


def save_ppm(path, img: RgbImage) -> None:
    _write_atomic(path, ppm_bytes(img))


def load_image(path):
    """Load a Bayer PGM or RGB PPM, dispatching on the magic number."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] == b"P5":
        return parse_pgm(buf)
    if buf[:2] == b"P6":
        return parse_ppm(buf)
    raise ParseError("not a binary PGM (P5) or PPM (P6) file", 0)


def save_image(path, img, format=None) -> None:
    fmt = (format or "").lower()
    if isinstance(img, BayerImage):
        if fmt not in ("", "pgm"):
            raise EncodingError(f"Bayer frames are saved as PGM, not {format}")
        save_pgm(path, img)
    elif isinstance(img, RgbImage):
        if fmt not in ("", "ppm"):
            raise EncodingError(f"RGB images are saved as PPM, not {format}")
        save_ppm(path, img)
    else:
        raise EncodingError(f"cannot save {type(img).__name__}")


def tensor_to_bytes(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype == np.float32:
        code = 0
    elif arr.dtype == np.float64:
        code = 1
    else:
        raise EncodingError(f"FTEN stores float32/float64, got {arr.dtype}")
    if arr.ndim > 255:
        raise EncodingError("too many dimensions")
    head = FTEN_MAGIC + bytes([FTEN_VERSION, code, arr.ndim])
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype=_FTEN_DTYPES[code]).tobytes()


def read_tensor_blob(buf: bytes, offset: int = 0):
    """Decode one FTEN blob at ``offset``; return (array, offset past the blob)."""
    if buf[offset : offset + 4] != FTEN_MAGIC:
        raise ParseError("bad FTEN magic", offset)
    if len(buf) < offset + 7:
        raise ParseError("truncated FTEN header", len(buf))
    version, code, ndim = buf[offset + 4], buf[offset + 5], buf[offset + 6]
    if version != FTEN_VERSION:
        raise ParseError(f"unsupported FTEN version {version}", offset + 4)
    if code not in _FTEN_DTYPES:
        raise ParseError(f"unknown FTEN dtype {code}", offset + 5)
    pos = offset + 7
    if len(buf) < pos + 8 * ndim:
        raise ParseError("truncated FTEN extents", len(buf))
    dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
    pos += 8 * ndim
    dtype = _FTEN_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    need = count * dtype.itemsize
    if len(buf) < pos + need:
        raise ParseError(f"truncated FTEN payload: need {need} bytes", len(buf))
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(dims)
    return arr.astype(dtype.newbyteorder("="), copy=True), pos + need


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    arr, end = read_tensor_blob(buf, 0)
    if end != len(buf):
        raise ParseError("trailing bytes after FTEN payload", end)
    return arr


def save_tensor(path, arr) -> None:
    _write_atomic(path, tensor_to_bytes(arr))


def _write_atomic(path, payload: bytes) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
