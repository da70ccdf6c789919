"""On-disk formats: the binary field container and plain-text result tables.

Field container (all little-endian)::

    b"HMFD" | version u32 | d u32 | cells u32 x d | h f64 | lambda f64 | Lambda f64
    | cell data f64, row-major cells, d(d+1)/2 upper-triangle entries per cell

Tables are whitespace-separated with a header row; floats carry 17
significant digits so they round-trip exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import CoefficientField, EllipticityBounds, GridSpec, n_entries

MAGIC = b"HMFD"
VERSION = 1


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_field(path, field: CoefficientField, provenance: dict | None = None) -> list[Path]:
    """Write the container and, if ``provenance`` is given, a ``.txt`` sidecar."""
    path = Path(path)
    g = field.grid
    header = MAGIC + struct.pack(f"<II{g.dim}I", VERSION, g.dim, *g.cells)
    header += struct.pack("<ddd", g.h, field.bounds.lam, field.bounds.Lam)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    written = [path]
    if provenance is not None:
        side = path.with_name(path.name + ".txt")
        side.write_text("".join(f"{k} = {provenance[k]}\n" for k in sorted(provenance)))
        written.append(side)
    return written


def read_field(path) -> CoefficientField:
    """Inverse of :func:`write_field`; the grid is taken as periodic."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an HMFD container")
    version, d = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    off = 12
    cells = struct.unpack_from(f"<{d}I", data, off)
    off += 4 * d
    h, lam, Lam = struct.unpack_from("<ddd", data, off)
    off += 24
    count = int(np.prod(cells)) * n_entries(d)
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off)
    if off + 8 * count != len(data):
        raise ValueError(f"{path}: payload size does not match the header")
    grid = GridSpec(d, tuple(cells), h, True)
    return CoefficientField(grid, values.reshape(grid.shape + (n_entries(d),)).astype(float),
                            EllipticityBounds(lam, Lam))


def entry_names(d: int) -> list[str]:
    iu = np.triu_indices(d)
    return [f"a{i + 1}{j + 1}" for i, j in zip(*iu)]


def law_table(law) -> str:
    d = law.matrices[0].dim if law.matrices else 1
    lines = [" ".join(["seed_index", "weight"] + entry_names(d))]
    for idx, w, A in zip(law.seed_indices, law.weights, law.matrices):
        lines.append(" ".join([str(idx), fmt(w)] + [fmt(x) for x in A.triangle()]))
    return "\n".join(lines) + "\n"


def read_law_table(text: str):
    rows = [line.split() for line in text.strip().splitlines()]
    header, body = rows[0], rows[1:]
    idx = [int(r[0]) for r in body]
    weights = np.array([float(r[1]) for r in body])
    entries = np.array([[float(x) for x in r[2:]] for r in body]).reshape(len(body), len(header) - 2)
    return header, idx, weights, entries


def convergence_table(report) -> str:
    lines = ["eps l2_error h1_seminorm"]
    for e, err, h1 in report.rows():
        lines.append(f"{fmt(e)} {fmt(err)} {fmt(h1)}")
    return "\n".join(lines) + "\n"


def convergence_csv(report) -> str:
    lines = ["# eps,l2_error,h1_seminorm"]
    for e, err, h1 in report.rows():
        lines.append(f"{fmt(e)},{fmt(err)},{fmt(h1)}")
    return "\n".join(lines) + "\n"
