"""Finite metric measure spaces.

A space is a finite point set ``0..P-1`` carrying a metric (an explicit
distance matrix, or shortest-path distances of a weighted edge list), a
nonnegative measure per point, and per-edge conductances used by the
Dirichlet form.  Spaces are immutable after construction.

Balls are closed, ``{p : d(x, p) <= r}``, and ball centers always range over
the points of the space.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DomainError, ValidationError

DENSE_LIMIT = 5000
TRIANGLE_EXHAUSTIVE_LIMIT = 200
TRIANGLE_SAMPLES = 20000
INF = math.inf

# relative slack in every ``d <= r`` test; absorbs summation error in
# shortest-path lengths (e.g. 0.1 + 0.2 vs 0.3)
RADIUS_RTOL = 1e-12


def within(d, r: float):
    """Closed-ball membership test with a relative float slack."""
    return d <= r * (1.0 + RADIUS_RTOL)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class PointSet:
    """Sorted set of point indices together with its cached measure."""

    __slots__ = ("indices", "measure")

    def __init__(self, indices: np.ndarray, measure: float):
        self.indices = _readonly(np.asarray(indices, dtype=np.intp))
        self.measure = float(measure)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return (int(i) for i in self.indices)

    def __contains__(self, p) -> bool:
        i = np.searchsorted(self.indices, p)
        return bool(i < len(self.indices) and self.indices[i] == p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __hash__(self) -> int:
        return hash(self.indices.tobytes())

    def __repr__(self) -> str:
        body = ", ".join(str(int(i)) for i in self.indices[:12])
        if len(self.indices) > 12:
            body += ", ..."
        return f"PointSet({{{body}}}, measure={self.measure:g})"

    def issubset(self, other: "PointSet") -> bool:
        return bool(np.isin(self.indices, other.indices).all())

    def isdisjoint(self, other: "PointSet") -> bool:
        return not np.isin(self.indices, other.indices).any()

    def tolist(self) -> list[int]:
        return [int(i) for i in self.indices]


class MetricMeasureSpace:
    """Finite metric measure space ``(X, d, mu)`` with an optional edge graph.

    Parameters
    ----------
    measure : array_like, shape (P,)
        Nonnegative mass of every point.
    edges : array_like, shape (E, 2), optional
        Undirected edges ``(u, v)``.  Needed for the Dirichlet form and, when
        no distance matrix is given, for the shortest-path metric.
    lengths : array_like, shape (E,), optional
        Positive edge lengths.
    weights : array_like, shape (E,), optional
        Nonnegative edge conductances; default 1.
    distance_matrix : array_like, shape (P, P), optional
        Explicit metric.  When edges are also given, every edge must satisfy
        ``d(u, v) <= length(u, v)`` so that distance functions stay
        Lipschitz along edges.
    dimension : int
        Dimension hint ``n`` used by the geometry formulas and by scaling.
    meta : dict, optional
        Free-form provenance (generator kind, grid spacing, ...).
    validate : bool
        Run the invariant checks.
    require_connected : bool
        Reject disconnected edge graphs.
    """

    def __init__(
        self,
        measure,
        *,
        edges=None,
        lengths=None,
        weights=None,
        distance_matrix=None,
        dimension: int = 1,
        meta: Optional[dict] = None,
        validate: bool = True,
        require_connected: bool = True,
    ):
        mu = np.array(measure, dtype=float).reshape(-1)
        self._P = len(mu)
        self.measure = _readonly(mu)
        self.dimension = int(dimension)
        self.meta = dict(meta or {})

        if edges is None or len(edges) == 0:
            e = np.zeros((0, 2), dtype=np.intp)
        else:
            e = np.array(edges, dtype=np.intp).reshape(-1, 2)
        self.edges = _readonly(e)
        if lengths is None:
            if len(e) and distance_matrix is None:
                raise ValidationError("edge lengths are required for a graph metric")
            ln = np.ones(len(e)) if distance_matrix is None else None
        else:
            ln = np.array(lengths, dtype=float).reshape(-1)
        if ln is None:
            D = np.asarray(distance_matrix, dtype=float)
            ln = D[e[:, 0], e[:, 1]].copy() if len(e) else np.zeros(0)
        self.lengths = _readonly(ln)
        w = np.ones(len(e)) if weights is None else np.array(weights, dtype=float).reshape(-1)
        self.weights = _readonly(w)

        self._explicit = distance_matrix is not None
        self._dist: Optional[np.ndarray] = None
        if self._explicit:
            self._dist = _readonly(np.array(distance_matrix, dtype=float))
        self._graph = None
        self._cover_cache: dict[float, int] = {}
        self._profile = None
        self._count_cache: dict[float, np.ndarray] = {}

        if validate:
            self._validate(require_connected)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_edges(cls, n_points: int, edges, *, measure=None, dimension: int = 1, **kw):
        """Build a graph-metric space from ``(u, v, length[, weight])`` rows."""
        rows = [tuple(r) for r in edges]
        uv = [(int(r[0]), int(r[1])) for r in rows]
        lengths = [float(r[2]) for r in rows]
        weights = [float(r[3]) if len(r) > 3 else 1.0 for r in rows]
        mu = np.ones(n_points) if measure is None else measure
        return cls(mu, edges=uv, lengths=lengths, weights=weights, dimension=dimension, **kw)

    def _validate(self, require_connected: bool) -> None:
        P = self._P
        mu = self.measure
        if P == 0:
            raise ValidationError("space has no points")
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise ValidationError("measure must be finite and nonnegative at every point")
        if not self.omega > 0:
            raise ValidationError("total measure must be positive")
        e = self.edges
        E = len(e)
        if len(self.lengths) != E or len(self.weights) != E:
            raise ValidationError("edges, lengths and weights must have equal length")
        if E:
            if e.min() < 0 or e.max() >= P:
                raise ValidationError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                i = int(np.flatnonzero(e[:, 0] == e[:, 1])[0])
                raise ValidationError(f"self-loop at edge {i}")
            key = np.sort(e, axis=1)
            if len(np.unique(key, axis=0)) != E:
                raise ValidationError("duplicate edge")
            if not np.all(np.isfinite(self.lengths)) or np.any(self.lengths <= 0):
                raise ValidationError("edge lengths must be finite and positive")
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
                raise ValidationError("edge weights must be finite and nonnegative")
            if require_connected:
                ncomp, _ = csgraph.connected_components(self.graph, directed=False)
                if ncomp != 1:
                    raise ValidationError(f"edge graph is disconnected ({ncomp} components)")
        elif not self._explicit and P > 1:
            raise ValidationError("a space needs either edges or a distance matrix")
        if self._explicit:
            self._validate_matrix()

    def _validate_matrix(self) -> None:
        D = self._dist
        P = self._P
        if D.shape != (P, P):
            raise ValidationError(f"distance matrix has shape {D.shape}, expected {(P, P)}")
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise ValidationError("distances must be finite and nonnegative")
        if np.any(np.diag(D) != 0):
            raise ValidationError("distance matrix must vanish on the diagonal")
        if not np.allclose(D, D.T, rtol=1e-12, atol=0):
            i, j = np.argwhere(~np.isclose(D, D.T, rtol=1e-12, atol=0))[0]
            raise ValidationError(f"distance matrix is not symmetric at ({i}, {j})")
        tol = 1e-12 * max(float(D.max()), 1.0)
        if P <= TRIANGLE_EXHAUSTIVE_LIMIT:
            for k in range(P):
                viol = D > D[:, [k]] + D[[k], :] + tol
                if viol.any():
                    i, j = np.argwhere(viol)[0]
                    raise ValidationError(
                        f"triangle inequality fails for triple ({i}, {j}, {k}): "
                        f"d({i},{j})={D[i, j]:g} > d({i},{k})+d({k},{j})={D[i, k] + D[k, j]:g}"
                    )
        else:
            rng = np.random.default_rng(0)
            i, j, k = rng.integers(0, P, size=(3, TRIANGLE_SAMPLES))
            bad = D[i, j] > D[i, k] + D[k, j] + tol
            if bad.any():
                t = int(np.flatnonzero(bad)[0])
                raise ValidationError(f"triangle inequality fails for triple ({i[t]}, {j[t]}, {k[t]})")
        if len(self.edges):
            u, v = self.edges[:, 0], self.edges[:, 1]
            bad = D[u, v] > self.lengths * (1 + 1e-12)
            if bad.any():
                t = int(np.flatnonzero(bad)[0])
                raise ValidationError(f"edge {t} is shorter than the distance between its endpoints")

    # -- basic attributes -----------------------------------------------------

    @property
    def n_points(self) -> int:
        return self._P

    def __len__(self) -> int:
        return self._P

    @property
    def omega(self) -> float:
        """Total measure."""
        return float(self.measure.sum())

    @property
    def max_edge_length(self) -> float:
        return float(self.lengths.max()) if len(self.lengths) else 0.0

    @property
    def has_explicit_metric(self) -> bool:
        return self._explicit

    @property
    def graph(self) -> sparse.csr_matrix:
        """Symmetric sparse adjacency matrix holding edge lengths."""
        if self._graph is None:
            e = self.edges
            P = self._P
            g = sparse.coo_matrix((self.lengths, (e[:, 0], e[:, 1])), shape=(P, P))
            self._graph = (g + g.T).tocsr()
        return self._graph

    # -- distances ------------------------------------------------------------

    @property
    def distances(self) -> np.ndarray:
        """Dense ``P x P`` distance matrix (cached; P <= DENSE_LIMIT)."""
        if self._dist is None:
            if self._P > DENSE_LIMIT:
                raise DomainError(
                    f"dense distances refused for P={self._P} > {DENSE_LIMIT}; use distance_rows"
                )
            D = csgraph.shortest_path(self.graph, method="D", directed=False)
            # per-source summation order can leave the two triangles an ulp apart
            np.minimum(D, D.T, out=D)
            self._dist = _readonly(D)
        return self._dist

    def distance_rows(self, idx, limit: float = INF) -> np.ndarray:
        """Distances from each point in ``idx`` to all points (rows)."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.intp))
        if self._dist is not None or self._P <= DENSE_LIMIT:
            return self.distances[idx]
        return csgraph.dijkstra(self.graph, directed=False, indices=idx, limit=limit)

    def distance_block(self, rows, cols) -> np.ndarray:
        """Submatrix ``d(rows, cols)``."""
        rows = np.atleast_1d(np.asarray(rows, dtype=np.intp))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.intp))
        if self._dist is not None or self._P <= DENSE_LIMIT:
            return self.distances[np.ix_(rows, cols)]
        return self.distance_rows(rows)[:, cols]

    def radial_profile(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Row-sorted distances and the matching cumulative masses, or None
        for spaces too large for dense storage.  Cached."""
        if self._P > DENSE_LIMIT and self._dist is None:
            return None
        if self._profile is None:
            D = self.distances
            order = np.argsort(D, axis=1, kind="stable")
            ds = np.take_along_axis(D, order, axis=1)
            cum = np.cumsum(self.measure[order], axis=1)
            del order
            self._profile = (_readonly(ds), _readonly(cum))
        return self._profile

    def ball_counts(self, r: float) -> np.ndarray:
        """Number of points in ``ball(x, r)`` for every center x."""
        prof = self.radial_profile()
        if prof is None:
            return self.ball_measures(r, np.ones(self._P)).round().astype(np.int64)
        key = float(r)
        if key not in self._count_cache:
            if len(self._count_cache) >= 64:
                self._count_cache.pop(next(iter(self._count_cache)))
            self._count_cache[key] = _readonly(within(prof[0], r).sum(axis=1))
        return self._count_cache[key]

    def iter_row_blocks(self, block: int = 512, limit: float = INF):
        """Yield ``(indices, rows)`` blocks covering every point."""
        for s in range(0, self._P, block):
            idx = np.arange(s, min(s + block, self._P))
            yield idx, self.distance_rows(idx, limit=limit)

    def distance(self, p: int, q: int) -> float:
        self._check_point(p)
        self._check_point(q)
        return float(self.distance_rows([p])[0, q])

    @property
    def diameter(self) -> float:
        return max(float(rows.max()) for _, rows in self.iter_row_blocks())

    def _check_point(self, p) -> None:
        if not (isinstance(p, (int, np.integer)) and 0 <= p < self._P):
            raise DomainError(f"invalid point {p!r}")

    # -- point sets -------------------------------------------------------------

    def pointset(self, members: Iterable[int] | np.ndarray) -> PointSet:
        """Make a PointSet from indices or a boolean mask of length P."""
        a = np.asarray(members if not isinstance(members, PointSet) else members.indices)
        if a.dtype == bool:
            if a.shape != (self._P,):
                raise DomainError("boolean mask has the wrong length")
            idx = np.flatnonzero(a)
        else:
            idx = np.unique(a.astype(np.intp)) if a.size else np.zeros(0, dtype=np.intp)
            if idx.size and (idx[0] < 0 or idx[-1] >= self._P):
                raise DomainError("point index out of range")
        return PointSet(idx, self.measure[idx].sum())

    def all_points(self) -> PointSet:
        return PointSet(np.arange(self._P), self.omega)

    def mask(self, S: PointSet) -> np.ndarray:
        m = np.zeros(self._P, dtype=bool)
        m[S.indices] = True
        return m

    def union(self, *sets: PointSet) -> PointSet:
        if not sets:
            return self.pointset([])
        return self.pointset(np.concatenate([s.indices for s in sets]))

    def difference(self, S: PointSet, T: PointSet) -> PointSet:
        return self.pointset(np.setdiff1d(S.indices, T.indices))

    def intersection(self, S: PointSet, T: PointSet) -> PointSet:
        return self.pointset(np.intersect1d(S.indices, T.indices))

    # -- balls and enlargements -----------------------------------------------------

    def ball(self, center: int, r: float) -> PointSet:
        """Closed ball ``{p : d(center, p) <= r}``."""
        self._check_point(center)
        if r < 0:
            raise DomainError("radius must be nonnegative")
        row = self.distance_rows([center], limit=r * (1 + 2 * RADIUS_RTOL))[0]
        return self.pointset(within(row, r))

    def distance_to_set(self, S: PointSet) -> np.ndarray:
        """``d(p, S)`` for every point p."""
        if len(S) == 0:
            return np.full(self._P, INF)
        return self.distance_rows(S.indices).min(axis=0)

    def enlarge(self, S: PointSet, r: float) -> PointSet:
        """``S^r = {p : d(p, S) <= r}``."""
        if len(S) == 0:
            raise DomainError("cannot enlarge the empty set")
        if r < 0:
            raise DomainError("radius must be nonnegative")
        return self.pointset(within(self.distance_to_set(S), r))

    def set_distance(self, S: PointSet, T: PointSet) -> float:
        """Minimum pairwise distance; +inf when either set is empty."""
        if len(S) == 0 or len(T) == 0:
            return INF
        rows = self.distance_rows(S.indices)
        return float(rows[:, T.indices].min())

    def ball_matrix(self, r: float) -> sparse.csr_matrix:
        """Sparse boolean matrix ``B[c, p] = d(c, p) <= r``."""
        blocks = []
        for _, rows in self.iter_row_blocks(limit=r * (1 + 2 * RADIUS_RTOL)):
            blocks.append(sparse.csr_matrix(within(rows, r)))
        return sparse.vstack(blocks, format="csr")

    def ball_measures(self, r: float, weights: Optional[np.ndarray] = None) -> np.ndarray:
        """``mu(ball(x, r))`` for every center x, optionally with a restricted measure."""
        if weights is None:
            prof = self.radial_profile()
            if prof is not None:
                return prof[1][np.arange(self._P), self.ball_counts(r) - 1]
        w = self.measure if weights is None else weights
        out = np.empty(self._P)
        for idx, rows in self.iter_row_blocks(limit=r * (1 + 2 * RADIUS_RTOL)):
            out[idx] = within(rows, r) @ w
        return out

    def max_ball_mass(self, r: float, weights: Optional[np.ndarray] = None) -> float:
        return float(self.ball_measures(r, weights).max())

    def check_h2(self, r: float, threshold: float) -> bool:
        """True iff every closed r-ball has measure at most ``threshold``."""
        if r <= 0 or threshold <= 0:
            raise DomainError("r and threshold must be positive")
        return self.max_ball_mass(r) <= threshold

    # -- covering constant ----------------------------------------------------------

    def covering_for(self, x: int, r: float) -> list[int]:
        """Greedy cover of ``ball(x, 4r)`` by closed r-balls centred at points.

        Only centers within ``5r`` of ``x`` can meet the target ball, so the
        candidate pool is restricted to them.  Ties go to the lowest index.
        """
        self._check_point(x)
        row = self.distance_rows([x], limit=5 * r * (1 + 2 * RADIUS_RTOL))[0]
        target = np.flatnonzero(within(row, 4 * r))
        cand = np.flatnonzero(within(row, 5 * r))
        cover = within(self.distance_block(cand, target), r)
        uncovered = np.ones(len(target), dtype=bool)
        chosen = []
        while uncovered.any():
            gains = cover[:, uncovered].sum(axis=1)
            c = int(np.argmax(gains))
            chosen.append(int(cand[c]))
            uncovered &= ~cover[c]
        return chosen

    def covering_lower_bound(self, r: float) -> int:
        """Lower bound on the minimal number of r-balls covering some
        ``ball(x, 4r)``, from point counts and from masses."""
        by_count = self.ball_counts(4 * r).max() / self.ball_counts(r).max()
        big, small = self.ball_measures(4 * r), self.ball_measures(r)
        by_mass = big.max() / small.max() if small.max() > 0 else 1.0
        return max(1, math.ceil(max(by_count, by_mass) * (1 - 1e-12)))

    def estimate_covering_constant(self, r: float) -> int:
        """Discrete covering constant: every ``ball(x, 4r)`` is covered by that
        many r-balls (greedy cover per center, maximized over centers)."""
        if r <= 0:
            raise DomainError("r must be positive")
        key = float(r)
        if key not in self._cover_cache:
            self._cover_cache[key] = max(len(self.covering_for(x, r)) for x in range(self._P))
        return self._cover_cache[key]

    # -- scaling -----------------------------------------------------------------

    def scale(self, t: float) -> "MetricMeasureSpace":
        """Return the space with distances ``* t``, measure ``* t**n`` and
        conductances ``* t**(n-2)``; discrete eigenvalues then scale by ``t**-2``."""
        if not t > 0:
            raise DomainError("scale factor must be positive")
        n = self.dimension
        out = MetricMeasureSpace(
            self.measure * t**n,
            edges=self.edges,
            lengths=self.lengths * t,
            weights=self.weights * t ** (n - 2),
            distance_matrix=None if not self._explicit else self._dist * t,
            dimension=n,
            meta={**self.meta, "scale": self.meta.get("scale", 1.0) * t},
            validate=False,
        )
        if not self._explicit and self._dist is not None:
            out._dist = _readonly(self._dist * t)
        return out

    # -- serialization ---------------------------------------------------------------

    def to_dict(self) -> dict:
        """JSON-ready dictionary in the space file format."""
        d = {
            "points": self._P,
            "dimension": self.dimension,
            "measure": self.measure.tolist(),
            "edges": [
                [int(u), int(v), float(l), float(w)]
                for (u, v), l, w in zip(self.edges, self.lengths, self.weights)
            ],
        }
        if self._explicit:
            d["distance_matrix"] = self._dist.tolist()
        if self.meta:
            d["meta"] = self.meta
        return d

    def __repr__(self) -> str:
        kind = self.meta.get("kind", "space")
        return (
            f"MetricMeasureSpace({kind}, P={self._P}, edges={len(self.edges)}, "
            f"n={self.dimension}, omega={self.omega:g})"
        )


def scale_space(space: MetricMeasureSpace, t: float) -> MetricMeasureSpace:
    """Module-level alias of :meth:`MetricMeasureSpace.scale`."""
    return space.scale(t)
