"""Plain-text mesh format.

Grammar (one record per line, ``#`` starts a comment line)::

    helfrich-disc v1
    vertices <V>
    <i> <x> <y>                      # V lines, i = 0..V-1
    triangles <T>
    <i> <a> <b> <c>                  # T lines
    [values <V>                      # optional nodal values of u
    <i> <u>]
    [domain <P>                      # optional boundary polygon of U
    <i> <x> <y>]
    [directors <E> <family>          # optional, family unit | pseudo_unit
    <a> <b> <nx> <ny> <nz>]          # edge key a < b, sorted
    end

Floats are written with 17 significant digits, so a write/read round trip
reproduces every value exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .directors import FAMILIES, DirectorField
from .errors import MeshFormatError
from .mesh import Triangulation2D, TriangularComplex3D, build_triangulation

HEADER = "helfrich-disc v1"


def _g(x):
    return format(float(x), ".17g")


@dataclass
class MeshFile:
    triangulation: Triangulation2D
    values: np.ndarray | None = None
    director_keys: np.ndarray | None = None  # (K, 2)
    director_values: np.ndarray | None = None  # (K, 3)
    family: str | None = None

    def director_field(self, cx: TriangularComplex3D) -> DirectorField:
        if self.director_keys is None:
            raise MeshFormatError("file has no directors block")
        vals = np.full((cx.n_edges, 3), np.nan)
        for key, v in zip(self.director_keys, self.director_values):
            try:
                vals[cx.base.edge_index(int(key[0]), int(key[1]))] = v
            except KeyError:
                raise MeshFormatError(f"director for unknown edge {tuple(int(k) for k in key)}") from None
        if np.isnan(vals).any():
            missing = int(np.flatnonzero(np.isnan(vals[:, 0]))[0])
            raise MeshFormatError(f"no director for edge {cx.edge_key(missing)}")
        return DirectorField(cx, vals, self.family)


def dumps(t: Triangulation2D, values=None, directors: DirectorField | None = None) -> str:
    out = [HEADER, f"vertices {t.n_vertices}"]
    out += [f"{i} {_g(x)} {_g(y)}" for i, (x, y) in enumerate(t.vertices)]
    out.append(f"triangles {t.n_triangles}")
    out += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(t.triangles)]
    if values is not None:
        values = np.asarray(values, dtype=float)
        out.append(f"values {len(values)}")
        out += [f"{i} {_g(u)}" for i, u in enumerate(values)]
    if t.domain is not None:
        out.append(f"domain {len(t.domain)}")
        out += [f"{i} {_g(x)} {_g(y)}" for i, (x, y) in enumerate(t.domain)]
    if directors is not None:
        out.append(f"directors {directors.complex.n_edges} {directors.family}")
        for (a, b), v in zip(directors.complex.edges, directors.values):
            out.append(f"{a} {b} {_g(v[0])} {_g(v[1])} {_g(v[2])}")
    out.append("end")
    return "\n".join(out) + "\n"


def write(path, t: Triangulation2D, values=None, directors=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(t, values, directors))


def loads(text: str) -> MeshFile:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != HEADER:
        raise MeshFormatError(f"missing header line {HEADER!r}")
    pos = 1
    blocks = {}
    family = None
    while pos < len(lines):
        head = lines[pos].split()
        name = head[0]
        if name == "end":
            break
        if name not in ("vertices", "triangles", "values", "domain", "directors") or len(head) < 2:
            raise MeshFormatError(f"unexpected line {pos + 1}: {lines[pos]!r}")
        if name in blocks:
            raise MeshFormatError(f"duplicate block {name!r}")
        count = int(head[1])
        if name == "directors":
            family = head[2] if len(head) > 2 else "unit"
            if family not in FAMILIES:
                raise MeshFormatError(f"unknown director family {family!r}")
        rows = [ln.split() for ln in lines[pos + 1 : pos + 1 + count]]
        if len(rows) != count:
            raise MeshFormatError(f"block {name!r} is truncated")
        blocks[name] = rows
        pos += 1 + count
    else:
        raise MeshFormatError("missing 'end' line")

    def table(name, width, cast=float, skip_index=True):
        rows = blocks[name]
        start = 1 if skip_index else 0
        try:
            arr = np.array([[cast(x) for x in r[start:]] for r in rows])
        except ValueError as exc:
            raise MeshFormatError(f"bad number in block {name!r}: {exc}") from None
        if len(rows) and arr.shape[1] != width:
            raise MeshFormatError(f"block {name!r} expects {width} columns")
        return arr.reshape(-1, width)

    for req in ("vertices", "triangles"):
        if req not in blocks:
            raise MeshFormatError(f"missing {req!r} block")
    verts = table("vertices", 2)
    tris = table("triangles", 3, int)
    domain = table("domain", 2) if "domain" in blocks else None
    t = build_triangulation(verts, tris, domain)
    mf = MeshFile(t)
    if "values" in blocks:
        mf.values = table("values", 1).reshape(-1)
    if "directors" in blocks:
        raw = blocks["directors"]
        try:
            mf.director_keys = np.array([[int(r[0]), int(r[1])] for r in raw], dtype=np.int64).reshape(-1, 2)
            mf.director_values = np.array([[float(x) for x in r[2:]] for r in raw]).reshape(-1, 3)
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"bad directors block: {exc}") from None
        mf.family = family
    return mf


def read(path) -> MeshFile:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
