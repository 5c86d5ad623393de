"""Single-channel PGM (P2 plain / P5 raw) reading and writing.

Pixel values map to [0, 1] by dividing by maxval. Writing quantizes with
round-half-up: ``floor(v * maxval + 0.5)``.
"""

from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidParameterError

_WS = b" \t\n\r\v\f"


class _Cursor:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def skip_ws_and_comments(self):
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos : self.pos + 1]
            if ch in _WS:
                self.pos += 1
            elif ch == b"#":
                nl = data.find(b"\n", self.pos)
                self.pos = len(data) if nl < 0 else nl + 1
            else:
                break

    def token(self, what):
        self.skip_ws_and_comments()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1] not in _WS and data[self.pos : self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            raise FormatError(f"missing {what}", start)
        return data[start : self.pos], start

    def integer(self, what):
        tok, start = self.token(what)
        if not tok.isdigit():
            raise FormatError(f"{what} is not a non-negative integer: {tok[:16]!r}", start)
        return int(tok), start


def read_pgm(data):
    """Parse PGM bytes into a float field with values in [0, 1]."""
    if isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"expected magic P2 or P5, found {magic!r}", 0)
    cur = _Cursor(data)
    cur.pos = 2
    if cur.pos < len(data) and data[cur.pos : cur.pos + 1] not in _WS and data[cur.pos : cur.pos + 1] != b"#":
        raise FormatError("magic number must be followed by whitespace", 2)
    width, width_pos = cur.integer("width")
    height, height_pos = cur.integer("height")
    maxval, maxval_pos = cur.integer("maxval")
    if width < 1 or height < 1:
        raise FormatError(f"image dimensions must be positive, got {width}x{height}", width_pos if width < 1 else height_pos)
    if not 0 < maxval < 65536:
        raise FormatError(f"maxval must be in 1..65535, got {maxval}", maxval_pos)
    n = width * height

    if magic == b"P5":
        if cur.pos >= len(data) or data[cur.pos : cur.pos + 1] not in _WS:
            raise FormatError("expected single whitespace byte before raster", cur.pos)
        start = cur.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        if len(data) - start < need:
            raise FormatError(f"truncated raster: need {need} bytes, have {len(data) - start}", len(data))
        raw = np.frombuffer(data, dtype=dtype, count=n, offset=start).astype(np.int64)
        bad = np.flatnonzero(raw > maxval)
        if bad.size:
            raise FormatError(f"sample {raw[bad[0]]} exceeds maxval {maxval}", start + int(bad[0]) * dtype.itemsize)
    else:
        raw = np.empty(n, dtype=np.int64)
        for i in range(n):
            cur.skip_ws_and_comments()
            if cur.pos >= len(data):
                raise FormatError(f"truncated raster: got {i} of {n} samples", cur.pos)
            v, start = cur.integer("sample")
            if v > maxval:
                raise FormatError(f"sample {v} exceeds maxval {maxval}", start)
            raw[i] = v
    return raw.reshape(height, width).astype(float) / maxval


def quantize(u, maxval=255):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise InvalidParameterError(f"expected a 2-D field, got shape {u.shape}")
    if not np.all(np.isfinite(u)) or u.min() < 0.0 or u.max() > 1.0:
        raise InvalidParameterError("PGM output requires finite values in [0, 1]")
    return np.floor(u * maxval + 0.5).astype(np.int64)


def write_pgm(u, maxval=255, plain=False):
    """Encode a [0, 1] field as PGM bytes (P5 unless ``plain``)."""
    if not 0 < maxval < 65536:
        raise InvalidParameterError(f"maxval must be in 1..65535, got {maxval}")
    q = quantize(u, maxval)
    h, w = q.shape
    if plain:
        header = f"P2\n{w} {h}\n{maxval}\n".encode("ascii")
        rows = "\n".join(" ".join(str(v) for v in row) for row in q.tolist())
        return header + rows.encode("ascii") + b"\n"
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    return header + q.astype(dtype).tobytes()
