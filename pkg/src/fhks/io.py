"""Text time series and binary snapshot files.

Snapshot layout (all little-endian)::

    4s   magic b"FHKS"
    u16  format version
    u8   dimension d
    u8   symbol mode (0 continuum, 1 discrete)
    d x (f8 length, u32 cells)
    f8   t
    f8[n] u in C cell order
    f8[n] c in C cell order
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .domain import SYMBOL_MODES, DomainSpec, GridField

if TYPE_CHECKING:
    from .evolution import SimState, Trajectory

MAGIC = b"FHKS"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHBB")
_AXIS = struct.Struct("<dI")
_TIME = struct.Struct("<d")
_LE_F8 = np.dtype("<f8")


class SnapshotFormatError(ValueError):
    pass


def fmt_real(x: float) -> str:
    return "%.17g" % x


def series_header(levels: Sequence[float]) -> list[str]:
    cols = ["t", "mass", "u_min", "u_max", "c_min", "c_max", "viscous_energy_cum"]
    return cols + [f"entropy_{fmt_real(k)}" for k in levels]


def write_series(traj: Trajectory, path, levels: Sequence[float] = ()) -> None:
    """One CSV row per accepted step; ``levels`` only labels the entropy columns.

    When no level is given the labels are taken from the width of the first record.
    """
    recs = traj.diagnostics
    if not levels and recs and recs[0].entropy_residuals:
        levels = tuple(range(len(recs[0].entropy_residuals)))
    lines = [",".join(series_header(levels))]
    cum = 0.0
    for r in recs:
        cum += r.viscous_energy_increment
        row = [r.t, r.mass, r.u_min, r.u_max, r.c_min, r.c_max, cum, *r.entropy_residuals]
        lines.append(",".join(fmt_real(float(x)) for x in row))
    _write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_series(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text(encoding="ascii")
    rows = text.splitlines()
    header = rows[0].split(",")
    data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]]).reshape(-1, len(header))
    return header, data


@dataclass(frozen=True, eq=False)
class Snapshot:
    domain: DomainSpec
    t: float
    u: GridField
    c: GridField


def header_size(dimension: int) -> int:
    return _PREFIX.size + dimension * _AXIS.size + _TIME.size


def encode_snapshot(state: SimState) -> bytes:
    d = state.u.domain
    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, d.dimension, SYMBOL_MODES.index(d.symbol_mode))]
    parts += [_AXIS.pack(float(L), int(n)) for L, n in zip(d.lengths, d.cells)]
    parts.append(_TIME.pack(float(state.t)))
    for field in (state.u.values, state.chemo.c.values):
        parts.append(np.ascontiguousarray(field, dtype=_LE_F8).tobytes())
    return b"".join(parts)


def decode_snapshot(blob: bytes) -> Snapshot:
    if len(blob) < _PREFIX.size:
        raise SnapshotFormatError("file too short for a snapshot header")
    magic, version, dim, mode = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise SnapshotFormatError(f"snapshot format version {version} is not supported (expected {FORMAT_VERSION})")
    if dim not in (1, 2) or mode >= len(SYMBOL_MODES):
        raise SnapshotFormatError(f"corrupt header: dimension {dim}, symbol mode {mode}")
    if len(blob) < header_size(dim):
        raise SnapshotFormatError("file truncated inside the header")
    axes = [_AXIS.unpack_from(blob, _PREFIX.size + a * _AXIS.size) for a in range(dim)]
    (t,) = _TIME.unpack_from(blob, _PREFIX.size + dim * _AXIS.size)
    domain = DomainSpec(tuple(L for L, _ in axes), tuple(n for _, n in axes), SYMBOL_MODES[mode])
    n = int(np.prod(domain.cells))
    start = header_size(dim)
    if len(blob) != start + 16 * n:
        raise SnapshotFormatError(f"payload is {len(blob) - start} bytes, expected {16 * n}")
    body = np.frombuffer(blob, dtype=_LE_F8, offset=start).astype(float)
    u = GridField(body[:n].reshape(domain.shape), domain)
    c = GridField(body[n:].reshape(domain.shape), domain)
    return Snapshot(domain, t, u, c)


def write_snapshot(state: SimState, path) -> None:
    _write_bytes(path, encode_snapshot(state))


def read_snapshot(path) -> Snapshot:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc
    return decode_snapshot(blob)


def write_table(header: Sequence[str], rows: Sequence[Sequence], path) -> None:
    def cell(x):
        return fmt_real(float(x)) if isinstance(x, (float, int, np.floating)) and not isinstance(x, bool) else str(x)

    lines = [",".join(header)] + [",".join(cell(x) for x in r) for r in rows]
    _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
