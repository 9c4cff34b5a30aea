"""Binary cube/mask files, PGM frame import and sweep CSV.

Cube and mask records share a 24-byte little-endian header::

    magic[4] version:u16 flags:u16 n1:u32 n2:u32 B:u32 dtype:u8 reserved[3]

followed by ``n1*n2*B`` values in column-major-per-frame order. Cubes use
magic ``SCIC`` with float32 payload (dtype 1); masks use ``SCIM`` with one
byte per bit (dtype 0).
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..model import MaskSet, unvec, vec

CUBE_MAGIC = b"SCIC"
MASK_MAGIC = b"SCIM"
VERSION = 1
HEADER = struct.Struct("<4sHHIIIB3x")
_DTYPES = {1: np.dtype("<f4"), 0: np.dtype("u1")}


def _encode(magic: bytes, dtype_code: int, arr: np.ndarray) -> bytes:
    if arr.ndim != 3:
        raise ValidationError(f"expected a 3-D array, got shape {arr.shape}")
    n1, n2, B = arr.shape
    head = HEADER.pack(magic, VERSION, 0, n1, n2, B, dtype_code)
    return head + vec(arr).astype(_DTYPES[dtype_code]).tobytes()


def read_header(head: bytes) -> tuple[bytes, int, int, int, int]:
    if len(head) < HEADER.size:
        raise ValidationError("truncated header")
    magic, version, flags, n1, n2, B, dtype = HEADER.unpack(head[:HEADER.size])
    if magic not in (CUBE_MAGIC, MASK_MAGIC):
        raise ValidationError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValidationError(f"unsupported version {version}")
    if flags != 0:
        raise ValidationError(f"unsupported flags {flags}")
    if dtype not in _DTYPES or (magic == CUBE_MAGIC) != (dtype == 1):
        raise ValidationError(f"dtype code {dtype} does not match magic {magic!r}")
    return magic, n1, n2, B, dtype


def payload_size(n1: int, n2: int, B: int, dtype: int) -> int:
    return n1 * n2 * B * _DTYPES[dtype].itemsize


def _decode(data: bytes, want: bytes) -> np.ndarray:
    magic, n1, n2, B, dtype = read_header(data)
    if magic != want:
        raise ValidationError(f"expected magic {want!r}, found {magic!r}")
    body = data[HEADER.size:]
    if len(body) != payload_size(n1, n2, B, dtype):
        raise ValidationError("payload length does not match header dimensions")
    flat = np.frombuffer(body, dtype=_DTYPES[dtype])
    return unvec(flat, (n1, n2, B))


def encode_cube(x) -> bytes:
    return _encode(CUBE_MAGIC, 1, np.asarray(x))


def decode_cube(data: bytes) -> np.ndarray:
    return _decode(data, CUBE_MAGIC).astype(np.float64)


def encode_mask(m) -> bytes:
    bits = m.bits if isinstance(m, MaskSet) else np.asarray(m)
    return _encode(MASK_MAGIC, 0, bits)


def decode_mask(data: bytes) -> MaskSet:
    return MaskSet(bits=_decode(data, MASK_MAGIC).copy())


def write_cube(path, x) -> None:
    Path(path).write_bytes(encode_cube(x))


def read_cube(path) -> np.ndarray:
    return decode_cube(Path(path).read_bytes())


def write_mask(path, m) -> None:
    Path(path).write_bytes(encode_mask(m))


def read_mask(path) -> MaskSet:
    return decode_mask(Path(path).read_bytes())


def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    out, i = [], 0
    while len(out) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise ValidationError("truncated PGM header")
        out.append(data[i:j])
        i = j
    return out, i


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) or ASCII (P2) graymap, scaled to [0, 1] by its maxval."""
    data = Path(path).read_bytes()
    toks, pos = _pgm_tokens(data, 4)
    kind = toks[0]
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise ValidationError(f"malformed PGM header in {path}") from exc
    if not 0 < maxval < 65536:
        raise ValidationError(f"unsupported PGM maxval {maxval}")
    if kind == b"P5":
        dt = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
        body = data[pos + 1: pos + 1 + w * h * dt.itemsize]
        if len(body) != w * h * dt.itemsize:
            raise ValidationError(f"truncated PGM payload in {path}")
        img = np.frombuffer(body, dtype=dt).reshape(h, w)
    elif kind == b"P2":
        img = np.array(data[pos:].split()[: w * h], dtype=np.int64).reshape(h, w)
    else:
        raise ValidationError(f"not a graymap: {kind!r}")
    return img.astype(np.float64) / maxval


def import_frames(paths) -> np.ndarray:
    frames = [read_pgm(p) for p in paths]
    if not frames:
        raise ValidationError("no frames given")
    if len({f.shape for f in frames}) != 1:
        raise ValidationError("frames have different sizes")
    return np.stack(frames, axis=2)


CSV_HEADER = ["scene", "solver", "p", "T_over_B", "noise_sigma", "seed",
              "psnr_db", "ps_hat", "bound_rhs", "wall_time_s"]
ERROR_MARK = "error"


@dataclass
class SweepRecord:
    scene: str
    solver: str
    p: float
    T_over_B: float
    noise_sigma: float
    seed: int
    psnr_db: float | None
    ps_hat: float | None
    bound_rhs: float | None
    wall_time_s: float
    error: str | None = None

    def key(self) -> tuple:
        return (self.scene, self.solver, self.p, self.T_over_B, self.noise_sigma, self.seed)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def record_row(rec: SweepRecord) -> list[str]:
    row = [_fmt(getattr(rec, f)) for f in CSV_HEADER]
    if rec.error is not None:
        row[CSV_HEADER.index("psnr_db")] = ERROR_MARK
    return row


def emit_csv(records, fh=None, header: bool = True) -> str | None:
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow(record_row(rec))
    return buf.getvalue() if fh is None else None


def _opt_float(s: str):
    return None if s == "" else float(s)


def parse_csv(text_or_fh) -> list[SweepRecord]:
    fh = io.StringIO(text_or_fh) if isinstance(text_or_fh, str) else text_or_fh
    reader = csv.reader(fh)
    head = next(reader, None)
    if head != CSV_HEADER:
        raise ValidationError(f"unexpected CSV header {head}")
    out = []
    for row in reader:
        if not row:
            continue
        d = dict(zip(CSV_HEADER, row))
        err = ERROR_MARK if d["psnr_db"] == ERROR_MARK else None
        out.append(SweepRecord(
            scene=d["scene"], solver=d["solver"], p=float(d["p"]),
            T_over_B=float(d["T_over_B"]), noise_sigma=float(d["noise_sigma"]),
            seed=int(d["seed"]),
            psnr_db=None if err else _opt_float(d["psnr_db"]),
            ps_hat=_opt_float(d["ps_hat"]), bound_rhs=_opt_float(d["bound_rhs"]),
            wall_time_s=float(d["wall_time_s"]), error=err,
        ))
    return out


RECORD_FIELDS = [f.name for f in fields(SweepRecord)]
