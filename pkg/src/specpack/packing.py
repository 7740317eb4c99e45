"""Packing families of well-separated sets of controlled measure.

``xi(m)`` is the largest measure covered by a union of ``m`` closed r-balls.
Scanning m upward until ``xi(m) >= alpha`` and thickening the optimal balls
from radius r to 4r gives a set ``A`` and a surrounding set ``D`` whose
complement stays ``3r`` away from ``A``; the covering constant bounds
``mu(D)``.  Repeating the construction inside the leftover region yields N
sets that are pairwise ``3r`` apart.

Exact maximization is a max-coverage problem, so two strategies exist:
exhaustive enumeration (test oracle for small spaces) and greedy growth with
single-center swap improvement.  Every guarantee is re-checked on the output.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

from .checks import Check, all_passed, at_least, at_most, holds
from .errors import ConstructionError, DomainError, HypothesisError
from .geometry import covering_constant
from .mmspace import INF, MetricMeasureSpace, PointSet, within

logger = logging.getLogger(__name__)

EXHAUSTIVE_POINTS = 12
PAIR_SWAP_POINTS = 64
PAIR_SWAP_CENTERS = 4
STRATEGIES = ("auto", "exhaustive", "greedy")


@dataclass(frozen=True)
class CoverageMaximizer:
    """How ``xi(m)`` is maximized.

    ``"auto"`` means exhaustive for spaces of at most 12 points and greedy
    with swaps otherwise.  ``seed`` orders the swap scan;
    ``exhaustive_limit`` caps the number of center tuples enumerated.
    """

    strategy: str = "auto"
    seed: int = 0
    exhaustive_limit: int = 500_000

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DomainError(f"strategy must be one of {STRATEGIES}")

    def resolve(self, n_points: int) -> str:
        if self.strategy == "auto":
            return "exhaustive" if n_points <= EXHAUSTIVE_POINTS else "greedy"
        return self.strategy


class _CoverageSearch:
    """Incremental maximizer of the restricted measure covered by m balls."""

    def __init__(self, space: MetricMeasureSpace, r: float, weights: np.ndarray,
                 strategy: str, maximizer: CoverageMaximizer, balls=None):
        self.space = space
        self.r = r
        self.w = weights
        self.strategy = strategy
        self.maximizer = maximizer
        self.B = (balls if balls is not None else space.ball_matrix(r)).astype(float).tocsr()
        self.P = space.n_points
        self.tol = 1e-12 * max(float(weights.sum()), 1e-300)
        self.centers: list[int] = []
        self.count = np.zeros(self.P, dtype=np.int64)
        self.m = 0
        self.values: list[float] = []

    def row(self, c: int) -> np.ndarray:
        B = self.B
        return B.indices[B.indptr[c]:B.indptr[c + 1]]

    def value_of(self, centers) -> float:
        if not centers:
            return 0.0
        covered = np.zeros(self.P, dtype=bool)
        for c in centers:
            covered[self.row(c)] = True
        return float(self.w[covered].sum())

    def advance(self) -> tuple[float, list[int]]:
        """Move from m to m+1 balls; returns ``(xi(m+1), centers)``."""
        self.m += 1
        if self.strategy == "exhaustive":
            value, centers = self._exhaustive(self.m)
            self.centers = centers
        else:
            self._greedy_add()
            self._swap()
            while self._pair_swap():
                self._swap()
            value = self.value_of(self.centers)
        self.values.append(value)
        return value, list(self.centers)

    # greedy ---------------------------------------------------------------------

    def _greedy_add(self) -> None:
        gains = self.B @ (self.w * (self.count == 0))
        if self.centers:
            gains[self.centers] = -np.inf
        c = int(np.argmax(gains))
        self.centers.append(c)
        self.count[self.row(c)] += 1

    def _swap(self) -> None:
        """First-improvement single-center swaps, positions visited in a
        seeded random order, until no swap gains more than ``tol``."""
        rng = np.random.default_rng(self.maximizer.seed + 7919 * self.m)
        B = self.B
        while True:
            m = len(self.centers)
            if m == 0 or m >= self.P:
                return
            free_w = self.w * (self.count == 0)
            base = B @ free_w
            # U[p, pos] = w[p] when p is covered only by center ``pos``
            rows, cols, vals = [], [], []
            loss = np.zeros(m)
            for pos, c in enumerate(self.centers):
                members = self.row(c)
                uniq = members[self.count[members] == 1]
                rows.append(uniq)
                cols.append(np.full(len(uniq), pos))
                vals.append(self.w[uniq])
                loss[pos] = self.w[uniq].sum()
            U = sparse.csc_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.P, m)
            )
            gain = (B @ U).toarray() + base[:, None] - loss[None, :]
            gain[self.centers, :] = -np.inf
            moved = False
            for pos in rng.permutation(m):
                c_new = int(np.argmax(gain[:, pos]))
                if gain[c_new, pos] > self.tol:
                    c_old = self.centers[pos]
                    self.count[self.row(c_old)] -= 1
                    self.count[self.row(c_new)] += 1
                    self.centers[pos] = c_new
                    moved = True
                    break
            if not moved:
                return

    def _pair_swap(self) -> bool:
        """Best replacement of two centers at once; only for small spaces,
        where single swaps can stall.  Returns True if it moved."""
        m = len(self.centers)
        if not (2 <= m <= PAIR_SWAP_CENTERS and self.P <= PAIR_SWAP_POINTS):
            return False
        Bd = self.B.toarray()
        current = self.value_of(self.centers)
        best_gain, best = self.tol, None
        for i, j in itertools.combinations(range(m), 2):
            keep = [c for q, c in enumerate(self.centers) if q not in (i, j)]
            covered = Bd[keep].any(axis=0) if keep else np.zeros(self.P, dtype=bool)
            u = self.w * ~covered
            single = Bd @ u
            pair = single[:, None] + single[None, :] - (Bd * u) @ Bd.T
            pair[keep, :] = -np.inf
            pair[:, keep] = -np.inf
            np.fill_diagonal(pair, -np.inf)
            a, b = np.unravel_index(int(np.argmax(pair)), pair.shape)
            gain = float(self.w[covered].sum()) + pair[a, b] - current
            if gain > best_gain:
                best_gain, best = gain, (i, j, int(a), int(b))
        if best is None:
            return False
        i, j, a, b = best
        for pos, c_new in ((i, a), (j, b)):
            self.count[self.row(self.centers[pos])] -= 1
            self.count[self.row(c_new)] += 1
            self.centers[pos] = c_new
        return True

    # exhaustive -----------------------------------------------------------------

    def _exhaustive(self, m: int) -> tuple[float, list[int]]:
        support = np.flatnonzero(self.w > 0)
        if support.size == 0:
            return 0.0, list(range(min(m, self.P)))
        Bs = self.B[:, support].toarray() > 0
        # one representative (lowest index) per distinct restricted ball
        _, first = np.unique(Bs, axis=0, return_index=True)
        cand = np.sort(first)
        cand = cand[Bs[cand].any(axis=1)]
        ws = self.w[support]
        if m >= len(cand):
            rest = np.setdiff1d(np.arange(self.P), cand)[: m - len(cand)]
            picked = [int(c) for c in np.sort(np.concatenate([cand, rest]))]
            return self.value_of(picked), picked
        n_combos = math.comb(len(cand), m)
        if n_combos > self.maximizer.exhaustive_limit:
            raise ConstructionError(
                f"exhaustive search over {n_combos} center tuples exceeds the limit "
                f"{self.maximizer.exhaustive_limit}",
                condition="exhaustive feasibility",
            )
        best_val, best = -1.0, None
        Bc = Bs[cand]
        chunk = max(1, 2_000_000 // max(1, Bc.shape[1] * m))
        it = itertools.combinations(range(len(cand)), m)
        while True:
            block = np.array(list(itertools.islice(it, chunk)), dtype=np.intp)
            if block.size == 0:
                break
            covered = Bc[block].any(axis=1)
            vals = covered @ ws
            j = int(np.argmax(vals))
            if vals[j] > best_val + self.tol:
                best_val, best = float(vals[j]), block[j]
        centers = [int(cand[i]) for i in best]
        # report through the same summation as the greedy path
        return self.value_of(centers), centers


def _weights(space: MetricMeasureSpace, restriction: Optional[PointSet]) -> np.ndarray:
    if restriction is None:
        return np.array(space.measure)
    w = np.zeros(space.n_points)
    w[restriction.indices] = space.measure[restriction.indices]
    return w


def xi(space: MetricMeasureSpace, maximizer: CoverageMaximizer, m: int, r: float,
       restriction: Optional[PointSet] = None) -> tuple[float, list[int]]:
    """Largest restricted measure covered by ``m`` closed r-balls, with centers.

    ``m`` larger than the number of points is clamped.  The greedy strategy
    builds the answer incrementally through ``1..m`` so that the returned
    values are nondecreasing in m.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if not r > 0:
        raise DomainError("r must be positive")
    m = min(m, space.n_points)
    search = _CoverageSearch(space, r, _weights(space, restriction),
                             maximizer.resolve(space.n_points), maximizer)
    if search.strategy == "exhaustive":
        search.m = m - 1
        return search.advance()
    for _ in range(m):
        value, centers = search.advance()
    return value, centers


@dataclass
class LemmaSets:
    """Output of one Lemma-type construction: ``A`` inside ``D``."""

    A: PointSet
    D: PointSet
    k: int
    centers: list[int]
    xi_values: list[float]
    alpha: float
    r: float
    C_hat: int
    strategy: str
    hypothesis: list[Check] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    def __iter__(self):
        return iter((self.A, self.D))

    @property
    def ok(self) -> bool:
        return all_passed(self.checks)


def _union_balls(space: MetricMeasureSpace, centers, radius: float) -> np.ndarray:
    rows = space.distance_rows(centers, limit=radius * 1.001)
    return within(rows, radius).any(axis=0)


def lemma1_construct(
    space: MetricMeasureSpace,
    maximizer: CoverageMaximizer,
    alpha: float,
    r: float,
    restriction: Optional[PointSet] = None,
    *,
    C_hat: Optional[int] = None,
    strict: bool = True,
    balls=None,
) -> LemmaSets:
    """Build ``A subset D subset Y`` with ``mu(A) >= alpha``,
    ``mu(D) <= 2 C alpha`` and ``d(A, Y minus D) >= 3r``.

    With ``strict=True`` the hypotheses ``0 < alpha <= mu(Y)/2`` and
    ``2 C mu_Y(ball(x, r)) <= alpha`` are enforced (HypothesisError);
    otherwise they are recorded and the construction proceeds, the
    postconditions being verified either way.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    Y = restriction if restriction is not None else space.all_points()
    w = _weights(space, Y)
    omega_Y = float(w.sum())
    C = int(C_hat if C_hat is not None else space.estimate_covering_constant(r))
    max_ball = space.max_ball_mass(r, w)
    pre = [
        holds("alpha > 0", alpha > 0),
        at_most("alpha <= mu(Y)/2", alpha, omega_Y / 2),
        at_most("2 C max mu_Y(ball(x,r)) <= alpha", 2 * C * max_ball, alpha),
    ]
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    failed = [c for c in pre if not c.passed]
    if failed and strict:
        raise HypothesisError(f"lemma hypothesis fails: {failed[0].name} "
                              f"(value {failed[0].value:g}, bound {failed[0].bound:g})")

    strategy = maximizer.resolve(space.n_points)
    result = _lemma_scan(space, maximizer, strategy, alpha, r, Y, w, C, balls)
    post = _lemma_checks(space, result, Y, w, C, hypothesis_held=not failed)
    result.hypothesis, result.checks = pre, post

    if not all_passed(post):
        bad = next(c for c in post if not c.passed)
        if strategy == "greedy":
            logger.info("greedy lemma output fails %s; retrying exhaustively", bad.name)
            try:
                result = _lemma_scan(space, maximizer, "exhaustive", alpha, r, Y, w, C, balls)
            except ConstructionError:
                raise ConstructionError(
                    f"greedy construction fails {bad.name} and exhaustive retry is infeasible",
                    condition=bad.name,
                ) from None
            post = _lemma_checks(space, result, Y, w, C, hypothesis_held=not failed)
            result.hypothesis, result.checks = pre, post
            if all_passed(post):
                return result
            bad = next(c for c in post if not c.passed)
        raise ConstructionError(f"lemma postcondition fails: {bad.name}", condition=bad.name)
    return result


def _lemma_scan(space, maximizer, strategy, alpha, r, Y, w, C, balls) -> LemmaSets:
    search = _CoverageSearch(space, r, w, strategy, maximizer, balls)
    value, centers = 0.0, []
    for k in range(1, space.n_points + 1):
        value, centers = search.advance()
        if value >= alpha:
            break
    else:
        raise ConstructionError(
            f"no union of balls reaches alpha={alpha:g} (restricted measure {w.sum():g})",
            condition="xi(k) >= alpha",
        )
    U = _union_balls(space, centers, r)
    V = _union_balls(space, centers, 4 * r)
    ymask = space.mask(Y)
    return LemmaSets(
        A=space.pointset(U & ymask), D=space.pointset(V & ymask), k=k, centers=centers,
        xi_values=list(search.values), alpha=alpha, r=r, C_hat=C, strategy=strategy,
    )


def _lemma_checks(space, res: LemmaSets, Y, w, C, *, hypothesis_held: bool) -> list[Check]:
    A, D, r = res.A, res.D, res.r
    rest = space.difference(Y, D)
    checks = [
        at_least("mu(A) >= alpha", A.measure, res.alpha),
        at_most("mu(D) <= 2 C alpha", D.measure, 2 * C * res.alpha),
        at_least("d(A, Y minus D) >= 3r", space.set_distance(A, rest), 3 * r),
        holds("A subset D", A.issubset(D)),
    ]
    if res.strategy == "exhaustive" and res.k >= 2:
        xs = res.xi_values
        checks.append(at_most("mu(A) <= xi(k-1) + xi(1)", A.measure, xs[res.k - 2] + xs[0]))
        if hypothesis_held:
            checks.append(at_most("mu(A) <= 3/2 alpha", A.measure, 1.5 * res.alpha))
    return checks


@dataclass
class PackingFamily:
    """N sets ``A_i`` with ``mu(A_i) >= alpha``, pairwise ``3r`` apart,
    each inside its own ``D_i``; the ``D_i`` are pairwise disjoint."""

    r: float
    alpha: float
    C_hat: int
    N: int
    sets: list[PointSet]
    enclosures: list[PointSet]
    centers: list[list[int]]
    strategy: str
    seed: int
    strict: bool
    C_continuum: Optional[int] = None
    hypothesis: list[Check] = field(default_factory=list)
    steps: list[list[Check]] = field(default_factory=list)
    report: list[Check] = field(default_factory=list)

    @property
    def measures(self) -> list[float]:
        return [s.measure for s in self.sets]

    @property
    def ok(self) -> bool:
        return all_passed(self.report)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "alpha": self.alpha,
            "C_hat": self.C_hat,
            "C_continuum": self.C_continuum,
            "N": self.N,
            "strategy": self.strategy,
            "seed": self.seed,
            "strict": self.strict,
            "sets": [s.tolist() for s in self.sets],
            "enclosures": [s.tolist() for s in self.enclosures],
            "centers": self.centers,
            "measures": self.measures,
            "enclosure_measures": [s.measure for s in self.enclosures],
            "hypothesis": [c.to_dict() for c in self.hypothesis],
            "steps": [[c.to_dict() for c in s] for s in self.steps],
            "verification": [c.to_dict() for c in self.report],
            "pass": self.ok,
        }

    @classmethod
    def from_dict(cls, space: MetricMeasureSpace, d: dict) -> "PackingFamily":
        """Rebuild a family from its JSON form and re-verify it on ``space``."""
        fam = cls(
            r=float(d["r"]), alpha=float(d["alpha"]), C_hat=int(d["C_hat"]), N=len(d["sets"]),
            sets=[space.pointset(s) for s in d["sets"]],
            enclosures=[space.pointset(s) for s in d.get("enclosures", d["sets"])],
            centers=d.get("centers", []), strategy=d.get("strategy", "unknown"),
            seed=int(d.get("seed", 0)), strict=bool(d.get("strict", True)),
            C_continuum=d.get("C_continuum"),
        )
        fam.report = verify_family(space, fam)
        return fam


def verify_family(space: MetricMeasureSpace, fam: PackingFamily) -> list[Check]:
    """Re-check every family invariant directly on the sets."""
    r, alpha = fam.r, fam.alpha
    checks = []
    for i, A in enumerate(fam.sets):
        checks.append(at_least(f"mu(A_{i + 1}) >= alpha", A.measure, alpha))
    dmin = INF
    rows_cache = [space.distance_rows(A.indices) if len(A) else None for A in fam.sets]
    for i in range(len(fam.sets)):
        for j in range(i + 1, len(fam.sets)):
            if rows_cache[i] is None or len(fam.sets[j]) == 0:
                continue
            dmin = min(dmin, float(rows_cache[i][:, fam.sets[j].indices].min()))
    checks.append(at_least("min_{i != j} d(A_i, A_j) >= 3r", dmin, 3 * r))
    checks.append(holds("A_i subset D_i", all(A.issubset(D) for A, D in zip(fam.sets, fam.enclosures))))
    total = sum(len(D) for D in fam.enclosures)
    checks.append(holds("D_i pairwise disjoint", len(space.union(*fam.enclosures)) == total))
    if fam.enclosures:
        checks.append(at_most("max mu(D_i) <= 2 C alpha",
                              max(D.measure for D in fam.enclosures), 2 * fam.C_hat * alpha))
    if fam.sets and all(len(A) for A in fam.sets):
        enl = [space.enlarge(A, r) for A in fam.sets]
        checks.append(holds("A_i^r pairwise disjoint",
                            len(space.union(*enl)) == sum(len(E) for E in enl)))
    running = 0.0
    budget_ok = True
    for j, D in enumerate(fam.enclosures, start=1):
        running += D.measure
        budget_ok &= running <= space.omega * j / fam.N * (1 + 1e-12)
    checks.append(holds("sum_{j<=s} mu(D_j) <= omega s/N", budget_ok))
    return checks


def corollary_hypothesis(space: MetricMeasureSpace, N: int, r: float,
                         C_hat: Optional[int] = None) -> Check:
    C = C_hat if C_hat is not None else space.estimate_covering_constant(r)
    return at_most("4 C^2 max mu(ball(x,r)) <= omega/N",
                   4 * C**2 * space.max_ball_mass(r), space.omega / N)


def corollary1_family(
    space: MetricMeasureSpace,
    maximizer: CoverageMaximizer,
    N: int,
    r: float,
    *,
    strict: bool = True,
) -> PackingFamily:
    """N pairwise ``3r``-separated sets of measure at least
    ``alpha = omega / (2 C N)`` built by repeating the lemma construction in
    ``Y_j = Y minus (D_1 u ... u D_{j-1})``."""
    if N < 1:
        raise DomainError("N must be >= 1")
    if not r > 0:
        raise DomainError("r must be positive")
    C = space.estimate_covering_constant(r)
    hyp = corollary_hypothesis(space, N, r, C)
    if not hyp.passed and strict:
        suggestion = admissible_radius(space, N)
        hint = f"; largest admissible r is {suggestion:.6g}" if suggestion else "; no radius is admissible"
        raise HypothesisError(
            f"packing hypothesis fails at r={r:g}: 4 C^2 max ball mass = {hyp.value:g} "
            f"> omega/N = {hyp.bound:g}{hint}",
            suggested_r=suggestion,
        )
    omega = space.omega
    alpha = omega / (2 * C * N)
    balls = space.ball_matrix(r)
    sets, encl, centers, steps = [], [], [], []
    taken = np.zeros(space.n_points, dtype=bool)
    for j in range(1, N + 1):
        Yj = space.pointset(~taken)
        budget = at_least(f"step {j}: mu(Y_j) >= omega (N+1-j)/N",
                          Yj.measure * (1 + 1e-12), omega * (N + 1 - j) / N)
        if not budget.passed and strict:
            raise ConstructionError(f"volume budget exhausted at step {j}", condition=budget.name, step=j)
        try:
            res = lemma1_construct(space, maximizer, alpha, r, Yj, C_hat=C, strict=strict, balls=balls)
        except (ConstructionError, HypothesisError) as exc:
            raise type(exc)(f"step {j}: {exc}") from exc
        sets.append(res.A)
        encl.append(res.D)
        centers.append(res.centers)
        steps.append([budget] + res.hypothesis + res.checks)
        taken[res.D.indices] = True
        strategy = res.strategy

    fam = PackingFamily(
        r=r, alpha=alpha, C_hat=C, N=N, sets=sets, enclosures=encl, centers=centers,
        strategy=strategy, seed=maximizer.seed, strict=strict,
        C_continuum=covering_constant(space.dimension, float(space.meta.get("a", 0.0)), r),
        hypothesis=[hyp], steps=steps,
    )
    fam.report = verify_family(space, fam)
    if not fam.ok:
        bad = next(c for c in fam.report if not c.passed)
        raise ConstructionError(f"family invariant fails: {bad.name}", condition=bad.name)
    return fam


def _radius_intervals(space: MetricMeasureSpace, thr: float) -> tuple[float, np.ndarray]:
    """Largest r_max with every ball(x, r) below ``thr`` for r < r_max, and the
    sorted breakpoints in ``(0, r_max)`` where balls or 4r-balls change."""
    prof = space.radial_profile()
    def blocks():
        return [prof] if prof is not None else _profile_blocks(space)

    r_max = INF
    for d_sorted, cum in blocks():
        over = cum > thr
        has = over.any(axis=1)
        if has.any():
            first = np.argmax(over[has], axis=1)
            r_max = min(r_max, float(d_sorted[has][np.arange(has.sum()), first].min()))
    if r_max == 0:
        return 0.0, np.zeros(0)
    cap = 4 * r_max if math.isfinite(r_max) else INF
    pts = [np.unique(d[(d > 0) & (d < cap)]) for d, _ in blocks()]
    d = np.unique(np.concatenate(pts)) if pts else np.zeros(0)
    bps = np.unique(np.concatenate([d[d < r_max], d / 4]))
    bps = bps[(bps > 0) & (bps < r_max)]
    return r_max, bps


def _profile_blocks(space: MetricMeasureSpace):
    mu = space.measure
    for _, rows in space.iter_row_blocks():
        order = np.argsort(rows, axis=1, kind="stable")
        yield np.take_along_axis(rows, order, axis=1), np.cumsum(mu[order], axis=1)


def admissible_radius(
    space: MetricMeasureSpace,
    N: int,
    *,
    min_radius: float = 0.0,
    max_candidates: int = 200,
    C_power: int = 2,
    factor: float = 4.0,
) -> Optional[float]:
    """Largest radius satisfying ``factor * C^C_power * max mu(ball(x, r)) <= omega/N``.

    Ball masses and the covering constant are piecewise constant in r,
    changing only at distances ``d`` and ``d/4``; one radius just below the
    upper end of each interval is tested, from the top down.  Returns None
    when no radius above ``min_radius`` qualifies.
    """
    thr = space.omega / N
    r_max, bps = _radius_intervals(space, thr / factor)
    if r_max == 0:
        return None
    if not math.isfinite(r_max):
        r_max = space.diameter * 1.25 + 1.0
    ends = np.concatenate([bps, [r_max]])
    starts = np.concatenate([[0.0], bps])
    cands = np.maximum(ends * (1 - 1e-6), 0.5 * (starts + ends))
    keep = cands > min_radius
    cands = cands[keep][::-1]
    if len(cands) > max_candidates:
        pick = np.unique(np.round(np.geomspace(1, len(cands), max_candidates)).astype(int) - 1)
        cands = cands[pick]
    for r in map(float, cands):
        M = space.max_ball_mass(r)
        if factor * space.covering_lower_bound(r) ** C_power * M > thr:
            continue
        if factor * space.estimate_covering_constant(r) ** C_power * M <= thr:
            return r
    return None
