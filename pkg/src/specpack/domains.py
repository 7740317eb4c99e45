"""Test-space generators and file loaders.

Grid-like generators use the lumped tensor-product discretization of the
Neumann Laplacian: a vertex carries ``h**n`` times the fraction of its dual
cell that lies inside the domain, and an axis edge carries ``h**(n-2)`` times
the fraction of its dual face inside the domain.  On a rectangle this halves
masses on faces (quartered at corners in 2D) and halves the conductance of
edges running along the boundary, so the discrete spectrum is exactly the sum
of one-dimensional Neumann spectra.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import IO, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DomainError, ParseError, ValidationError
from .geometry import unit_ball_volume
from .mmspace import MetricMeasureSpace

KINDS = ("path", "cycle", "grid", "torus_grid", "disk_grid", "point_cloud", "conformal_grid")
FORMATS = ("space-json", "csv-points", "edge-list")


def _shape(shape) -> tuple[int, ...]:
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise DomainError(f"shape: every axis needs at least one point, got {shape}")
    return shape


def _axis_factor(size: int, neumann: bool) -> np.ndarray:
    f = np.ones(size)
    if neumann and size > 1:
        f[0] = f[-1] = 0.5
    return f


def grid(shape, h: float = 1.0, *, neumann_mass: bool = True) -> MetricMeasureSpace:
    """Rectangular grid with spacing ``h``; ``len(shape)`` is the dimension.

    With ``neumann_mass=False`` every vertex gets ``h**n`` and every edge
    ``h**(n-2)`` (plain unweighted grid scaled by h).
    """
    shape = _shape(shape)
    if not h > 0:
        raise DomainError("h: grid spacing must be positive")
    n = len(shape)
    P = math.prod(shape)
    coords = np.indices(shape).reshape(n, -1).T
    factors = [_axis_factor(s, neumann_mass) for s in shape]
    cell = np.ones(P)
    for ax in range(n):
        cell *= factors[ax][coords[:, ax]]
    measure = h**n * cell

    idx = np.arange(P).reshape(shape)
    edges, weights = [], []
    for ax in range(n):
        if shape[ax] < 2:
            continue
        lo = np.take(idx, range(shape[ax] - 1), axis=ax).reshape(-1)
        hi = np.take(idx, range(1, shape[ax]), axis=ax).reshape(-1)
        w = np.ones(len(lo))
        for other in range(n):
            if other != ax:
                w *= factors[other][coords[lo, other]]
        edges.append(np.stack([lo, hi], axis=1))
        weights.append(h ** (n - 2) * w)
    E = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=int)
    W = np.concatenate(weights) if weights else np.zeros(0)
    kind = "path" if n == 1 else "grid"
    return MetricMeasureSpace(
        measure,
        edges=E,
        lengths=np.full(len(E), float(h)),
        weights=W,
        dimension=n,
        meta={"kind": kind, "shape": list(shape), "h": h, "a": 0.0, "neumann_mass": neumann_mass},
    )


def path(P: int, h: float = 1.0, *, neumann_mass: bool = True) -> MetricMeasureSpace:
    return grid((P,), h, neumann_mass=neumann_mass)


def torus_grid(shape, h: float = 1.0) -> MetricMeasureSpace:
    """Periodic grid (flat torus); vertex-transitive."""
    shape = _shape(shape)
    if any(s < 3 for s in shape):
        raise DomainError("shape: periodic axes need at least 3 points")
    if not h > 0:
        raise DomainError("h: grid spacing must be positive")
    n = len(shape)
    P = math.prod(shape)
    idx = np.arange(P).reshape(shape)
    edges = [
        np.stack([idx.reshape(-1), np.roll(idx, -1, axis=ax).reshape(-1)], axis=1) for ax in range(n)
    ]
    E = np.concatenate(edges)
    kind = "cycle" if n == 1 else "torus_grid"
    return MetricMeasureSpace(
        np.full(P, h**n),
        edges=E,
        lengths=np.full(len(E), float(h)),
        weights=np.full(len(E), h ** (n - 2)),
        dimension=n,
        meta={"kind": kind, "shape": list(shape), "h": h, "a": 0.0},
    )


def cycle(P: int, h: float = 1.0) -> MetricMeasureSpace:
    return torus_grid((P,), h)


def disk_grid(radius: float = 1.0, h: float = 0.1) -> MetricMeasureSpace:
    """Staircase approximation of a disk: the union of grid cells whose four
    corners lie in the closed disk, with lumped Neumann masses and weights."""
    if not radius > 0 or not h > 0:
        raise DomainError("radius and h must be positive")
    m = int(math.floor(radius / h))
    ticks = np.arange(-m, m + 1)
    inside = lambda i, j: (i * h) ** 2 + (j * h) ** 2 <= radius**2 * (1 + 1e-12)
    cells = [
        (i, j)
        for i in ticks[:-1]
        for j in ticks[:-1]
        if inside(i, j) and inside(i + 1, j) and inside(i, j + 1) and inside(i + 1, j + 1)
    ]
    if not cells:
        raise DomainError("h: spacing too coarse for the radius, no cell fits in the disk")
    vert_cells: dict[tuple, int] = {}
    edge_cells: dict[tuple, int] = {}
    for i, j in cells:
        corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
        for c in corners:
            vert_cells[c] = vert_cells.get(c, 0) + 1
        for a, b in zip(corners, corners[1:] + corners[:1]):
            key = (min(a, b), max(a, b))
            edge_cells[key] = edge_cells.get(key, 0) + 1
    verts = sorted(vert_cells)
    index = {v: t for t, v in enumerate(verts)}
    measure = np.array([h * h * vert_cells[v] / 4 for v in verts])
    keys = sorted(edge_cells)
    E = np.array([[index[a], index[b]] for a, b in keys])
    W = np.array([edge_cells[k] / 2 for k in keys])
    return MetricMeasureSpace(
        measure,
        edges=E,
        lengths=np.full(len(E), float(h)),
        weights=W,
        dimension=2,
        meta={"kind": "disk_grid", "radius": radius, "h": h, "a": 0.0,
              "coords": [[v[0] * h, v[1] * h] for v in verts]},
    )


def point_cloud(P: int = 100, seed: int = 0, eps: float = 0.15, dim: int = 2) -> MetricMeasureSpace:
    """Uniform random points in the unit cube with an eps-graph.

    The metric is Euclidean; edges join points at distance ``<= eps`` and
    carry length = Euclidean distance and conductance
    ``2 (n+2) / (omega_n eps^(n+2)) mu_u mu_v``, the kernel normalization under
    which the graph energy of a smooth function approximates its Dirichlet
    integral.  Disconnected clouds are rejected.
    """
    if P < 2:
        raise DomainError("P: need at least two points")
    if not eps > 0:
        raise DomainError("eps must be positive")
    rng = np.random.default_rng(seed)
    X = rng.random((P, dim))
    space = from_points(X, eps=eps, measure=np.full(P, 1.0 / P))
    space.meta.update({"kind": "point_cloud", "seed": seed, "a": 0.0})
    return space


def conformal_grid(shape=(17, 17), h: float = 1 / 16, amplitude: float = 0.3) -> MetricMeasureSpace:
    """Grid carrying the conformal metric ``exp(2u) g_flat`` with
    ``u = amplitude * sin(pi x) sin(pi y)``.

    Masses scale by ``exp(n u)``, edge lengths by ``exp(u)`` at the edge
    midpoint and conductances by ``exp((n-2) u)`` (unchanged in 2D).
    """
    base = grid(shape, h)
    n = base.dimension
    coords = np.indices(_shape(shape)).reshape(n, -1).T * h
    u = amplitude * np.prod(np.sin(math.pi * coords), axis=1)
    e = base.edges
    um = 0.5 * (u[e[:, 0]] + u[e[:, 1]])
    return MetricMeasureSpace(
        base.measure * np.exp(n * u),
        edges=e,
        lengths=base.lengths * np.exp(um),
        weights=base.weights * np.exp((n - 2) * um),
        dimension=n,
        meta={**base.meta, "kind": "conformal_grid", "amplitude": amplitude},
    )


def from_points(X, *, eps=None, measure=None) -> MetricMeasureSpace:
    """Euclidean point cloud; with ``eps`` an eps-graph supplies the edges."""
    X = np.asarray(X, dtype=float)
    P, n = X.shape
    mu = np.full(P, 1.0 / P) if measure is None else np.asarray(measure, dtype=float)
    D = cdist(X, X)
    edges = lengths = weights = None
    if eps is not None:
        iu, ju = np.triu_indices(P, k=1)
        keep = D[iu, ju] <= eps
        edges = np.stack([iu[keep], ju[keep]], axis=1)
        lengths = D[iu[keep], ju[keep]]
        c = 2 * (n + 2) / (unit_ball_volume(n) * eps ** (n + 2))
        weights = c * mu[edges[:, 0]] * mu[edges[:, 1]]
        if len(edges) == 0:
            raise ValidationError("eps-graph has no edges; increase eps")
    return MetricMeasureSpace(
        mu, edges=edges, lengths=lengths, weights=weights, distance_matrix=D, dimension=n,
        meta={"kind": "points", "eps": eps, "coords": X.tolist()},
    )


_GENERATORS = {
    "path": path,
    "cycle": cycle,
    "grid": grid,
    "torus_grid": torus_grid,
    "disk_grid": disk_grid,
    "point_cloud": point_cloud,
    "conformal_grid": conformal_grid,
}


def generate(kind: str, **params) -> MetricMeasureSpace:
    """Dispatch to a named generator; invalid parameters raise DomainError."""
    if kind not in _GENERATORS:
        raise DomainError(f"kind: unknown generator {kind!r}; choose from {', '.join(KINDS)}")
    try:
        return _GENERATORS[kind](**params)
    except TypeError as exc:
        raise DomainError(f"{kind}: {exc}") from None


# -- loading ------------------------------------------------------------------------


Source = Union[str, Path, IO[str]]


def _read_text(source: Source) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text()


def space_from_dict(d: dict) -> MetricMeasureSpace:
    if not isinstance(d, dict):
        raise ParseError("space JSON must be an object")
    D = d.get("distance_matrix")
    if "points" in d:
        P = d["points"]
        if not isinstance(P, int) or P < 1:
            raise ParseError("field 'points' must be a positive integer")
    elif D is not None:
        P = len(D)
    else:
        raise ParseError("missing field 'points'")
    n = d.get("dimension", 1)
    if not isinstance(n, int) or n < 1:
        raise ParseError("field 'dimension' must be a positive integer")
    mu = d.get("measure", [1.0] * P)
    if len(mu) != P:
        raise ParseError(f"field 'measure' has {len(mu)} entries, expected {P}")
    rows = d.get("edges", [])
    for t, row in enumerate(rows):
        if not isinstance(row, list) or len(row) not in (3, 4):
            raise ParseError(f"field 'edges'[{t}] must be [u, v, length] or [u, v, length, weight]")
    E = [(int(r[0]), int(r[1])) for r in rows]
    L = [float(r[2]) for r in rows]
    W = [float(r[3]) if len(r) == 4 else 1.0 for r in rows]
    if D is None and not rows and P > 1:
        raise ParseError("space needs 'edges' or 'distance_matrix'")
    return MetricMeasureSpace(
        mu, edges=E or None, lengths=L or None, weights=W or None,
        distance_matrix=D, dimension=n, meta=d.get("meta"),
    )


def _load_csv_points(text: str, dimension, eps) -> MetricMeasureSpace:
    if dimension is None:
        raise ParseError("csv-points needs the declared dimension")
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty CSV") from None
    coord_cols = [f"x_{i + 1}" for i in range(dimension)]
    if header == coord_cols:
        has_mass = False
    elif header == coord_cols + ["mass"]:
        has_mass = True
    else:
        raise ParseError(
            f"line 1: column mismatch, got {len(header)} columns {header}; "
            f"dimension {dimension} expects {coord_cols} with optional 'mass'"
        )
    X, mu = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field") from None
        X.append(vals[:dimension])
        if has_mass:
            mu.append(vals[dimension])
    if not X:
        raise ParseError("CSV has no data rows")
    return from_points(np.array(X), eps=eps, measure=np.array(mu) if has_mass else None)


def _load_edge_list(text: str, dimension, n_points) -> MetricMeasureSpace:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) not in (3, 4):
            raise ParseError(f"line {lineno}: expected 'u v length [weight]'")
        try:
            rows.append((int(parts[0]), int(parts[1]), *map(float, parts[2:])))
        except ValueError:
            raise ParseError(f"line {lineno}: malformed number") from None
    if not rows:
        raise ParseError("edge list is empty")
    P = n_points or 1 + max(max(r[0], r[1]) for r in rows)
    return MetricMeasureSpace.from_edges(P, rows, dimension=dimension or 1)


def load(source: Source, format: str = "space-json", *, dimension=None, eps=None,
         n_points=None) -> MetricMeasureSpace:
    """Load and validate a space from a path or text stream."""
    if format not in FORMATS:
        raise DomainError(f"format must be one of {FORMATS}")
    text = _read_text(source)
    if format == "space-json":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}: {exc.msg}") from None
        return space_from_dict(d)
    if format == "csv-points":
        return _load_csv_points(text, dimension, eps)
    return _load_edge_list(text, dimension, n_points)


def dumps(space: MetricMeasureSpace) -> str:
    return json.dumps(space.to_dict(), sort_keys=True)


def save(space: MetricMeasureSpace, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(space))

