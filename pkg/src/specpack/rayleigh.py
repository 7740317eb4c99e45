"""Plateau test functions, Rayleigh quotients and min-max eigenvalue bounds.

A plateau over a core set ``A`` equals 1 on ``A``, decays linearly as
``1 - d(p, A)/r`` and vanishes beyond distance r.  Along an edge the values
differ by at most ``length/r`` because distance-to-a-set is 1-Lipschitz, so
the energy of a plateau is controlled by the measure of a thin collar around
``A``.  Plateaus over well-separated sets have disjoint supports and no edge
between their positive parts; they are then orthogonal both in mass and in
energy, and min-max turns their quotients into eigenvalue upper bounds.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .checks import Check, all_passed, at_most, holds
from .errors import DomainError, HypothesisError, InvariantError, PreconditionError
from .geometry import GeometryConstants, bound_theorem2, schedule_radius
from .mmspace import MetricMeasureSpace, PointSet
from .packing import CoverageMaximizer, PackingFamily, admissible_radius, corollary1_family
from .spectrum import DiscreteLaplacian, SpectrumResult, space_spectrum

logger = logging.getLogger(__name__)

MINMAX_SLACK = 1e-10


def worker_count() -> int:
    """Thread cap from ``SPECPACK_THREADS`` (default: up to 4 CPUs)."""
    raw = os.environ.get("SPECPACK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"SPECPACK_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(4, os.cpu_count() or 1))


def c_geom(space: MetricMeasureSpace) -> float:
    """``max_p sum_{e ~ p} w_e l_e^2 / mu(p)``.

    Converts the energy of edges touching a set into that set's measure.
    Infinite if a massless point has an incident edge of positive weight.
    """
    e = space.edges
    if len(e) == 0:
        raise DomainError("space has no edges")
    star = np.zeros(space.n_points)
    contrib = space.weights * space.lengths**2
    np.add.at(star, e[:, 0], contrib)
    np.add.at(star, e[:, 1], contrib)
    mu = space.measure
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(star > 0, star / mu, 0.0)
    return float(ratio.max())


@dataclass
class PlateauFunction:
    values: np.ndarray
    core: PointSet
    r: float
    support: PointSet
    energy: float
    mass: float

    @property
    def rayleigh(self) -> float:
        return self.energy / self.mass

    @property
    def positive(self) -> np.ndarray:
        return np.flatnonzero(self.values > 0)

    def to_dict(self) -> dict:
        return {
            "core": self.core.tolist(),
            "core_measure": self.core.measure,
            "support_measure": self.support.measure,
            "r": self.r,
            "energy": self.energy,
            "mass": self.mass,
            "rayleigh": self.rayleigh,
        }


def dirichlet_energy(lap: DiscreteLaplacian, f: np.ndarray) -> float:
    return lap.energy(f)


def _edge_energy(space: MetricMeasureSpace, f: np.ndarray) -> float:
    e = space.edges
    diff = f[e[:, 0]] - f[e[:, 1]]
    return float(space.weights @ (diff * diff))


def plateau(space: MetricMeasureSpace, A: PointSet, r: float) -> PlateauFunction:
    """``f = max(0, 1 - d(., A)/r)`` with its energy and mass."""
    if len(A) == 0:
        raise DomainError("plateau core must be nonempty")
    if not r > 0:
        raise DomainError("r must be positive")
    if not A.measure > 0:
        raise DomainError("plateau core must have positive measure")
    dist = space.distance_to_set(A)
    f = np.clip(1.0 - dist / r, 0.0, 1.0)
    f[A.indices] = 1.0
    support = space.enlarge(A, r)
    f[~space.mask(support)] = 0.0
    mass = float(space.measure @ (f * f))
    return PlateauFunction(values=f, core=A, r=float(r), support=support,
                           energy=_edge_energy(space, f), mass=mass)


def lipschitz_violation(space: MetricMeasureSpace, fn: PlateauFunction) -> float:
    """Largest ``|f_u - f_v| - length/r`` over edges; nonpositive when Lipschitz."""
    e = space.edges
    if len(e) == 0:
        return -math.inf
    diff = np.abs(fn.values[e[:, 0]] - fn.values[e[:, 1]])
    return float((diff - space.lengths / fn.r).max())


def rayleigh_bound_lemma2(space: MetricMeasureSpace, A: PointSet, r: float,
                          fn: Optional[PlateauFunction] = None) -> float:
    """``c_geom / r^2 * mu(A^(r+h) minus A) / mu(A)``, with h the longest edge.

    Every edge where the plateau varies has an endpoint in ``A^(r+h)`` outside
    ``A``; summing ``w l^2 / r^2`` over the stars of those endpoints gives the
    bound.  Raises InvariantError if the plateau quotient exceeds it.
    """
    fn = fn if fn is not None else plateau(space, A, r)
    band = space.difference(space.enlarge(A, r + space.max_edge_length), A)
    bound = c_geom(space) / r**2 * band.measure / A.measure
    if not fn.rayleigh <= bound:
        raise InvariantError(f"plateau quotient {fn.rayleigh:.17g} exceeds the collar bound {bound:.17g}")
    return bound


def q_filter(space: MetricMeasureSpace, family: PackingFamily, V: float, k: int) -> list[int]:
    """Indices of the k sets with smallest ``mu(A_i^r)`` among those with
    ``mu(A_i^r) <= V/k`` (ties by index), returned in increasing order."""
    if k < 1:
        raise DomainError("k must be >= 1")
    if not V > 0:
        raise DomainError("V must be positive")
    enl = np.array([space.enlarge(A, family.r).measure for A in family.sets])
    ok = np.flatnonzero(enl <= V / k)
    if len(ok) < k:
        raise InvariantError(
            f"only {len(ok)} of {len(enl)} enlargements have measure <= V/k = {V / k:g}; "
            "the enlargements cannot be disjoint"
        )
    order = ok[np.lexsort((ok, enl[ok]))]
    return sorted(int(i) for i in order[:k])


def _check_orthogonal(space: MetricMeasureSpace, functions: Sequence[PlateauFunction]) -> None:
    owner = np.full(space.n_points, -1)
    for i, fn in enumerate(functions):
        idx = fn.support.indices
        clash = owner[idx] >= 0
        if clash.any():
            j = int(owner[idx][clash][0])
            raise PreconditionError(f"supports of functions {j} and {i} overlap")
        owner[idx] = i
    pos_owner = np.full(space.n_points, -1)
    for i, fn in enumerate(functions):
        pos_owner[fn.positive] = i
    e = space.edges
    if len(e):
        ou, ov = pos_owner[e[:, 0]], pos_owner[e[:, 1]]
        bad = (ou >= 0) & (ov >= 0) & (ou != ov) & (space.weights > 0)
        if bad.any():
            u, v = e[np.flatnonzero(bad)[0]]
            raise PreconditionError(
                f"edge ({u}, {v}) joins the positive parts of functions {ou[bad][0]} and {ov[bad][0]}"
            )


def eigen_upper_bounds(space: MetricMeasureSpace, functions: Sequence[PlateauFunction]) -> np.ndarray:
    """``bound[m-1] = max_{i <= m} R(f_i)`` after sorting quotients ascending.

    The functions must have pairwise disjoint supports and no edge between
    their positive parts (checked); they are then orthogonal in mass and in
    energy, so ``lambda_m <= bound[m-1]``.
    """
    if not functions:
        return np.zeros(0)
    _check_orthogonal(space, functions)
    q = np.array([fn.rayleigh for fn in functions])
    return np.maximum.accumulate(np.sort(q, kind="stable"))


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass
class PipelineResult:
    report: dict
    family: PackingFamily
    plateaus: list[PlateauFunction]
    spectrum: SpectrumResult
    space: MetricMeasureSpace  # the normalized (scaled) space the construction ran on
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.report["pass"])


def _pipeline_radius(work: MetricMeasureSpace, N: int, r_sched: float, C_hat_at) -> tuple[float, str]:
    """Scheduled radius when it resolves the edge scale and is admissible,
    otherwise the largest admissible radius above ``h/3``."""
    h = work.max_edge_length
    if 3 * r_sched > h:
        C = C_hat_at(r_sched)
        if 4 * C**2 * work.max_ball_mass(r_sched) <= work.omega / N:
            return r_sched, "schedule"
    r = admissible_radius(work, N, min_radius=h / 3)
    if r is None:
        raise HypothesisError(
            f"no radius above h/3 = {h / 3:g} satisfies the packing hypothesis for N = {N}; "
            "refine the space or lower k",
            suggested_r=admissible_radius(work, N),
        )
    return r, "admissible"


def theorem2_pipeline(
    space: MetricMeasureSpace,
    consts: GeometryConstants,
    a: float,
    k: int,
    *,
    maximizer: Optional[CoverageMaximizer] = None,
    tol: float = 1e-9,
) -> PipelineResult:
    """Construct 2k separated plateaus, bound ``lambda_k`` from them, and
    compare with ``A_n a^2 + B_n (k/V)^(2/n)`` and the computed spectrum.

    For ``a > 0`` the space is rescaled by ``t = a`` (curvature normalized to
    1), and eigenvalue-type outputs are multiplied back by ``a^2``.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if a < 0 or not math.isfinite(a):
        raise DomainError("a must be finite and nonnegative")
    if consts.n != space.dimension:
        raise DomainError(f"constants are for n={consts.n}, space has dimension {space.dimension}")
    maximizer = maximizer or CoverageMaximizer()
    t = a if a > 0 else 1.0
    work = space.scale(t) if t != 1.0 else space
    lam_scale = t * t
    n = consts.n
    V_orig, V = space.omega, work.omega
    N = 2 * k

    r_k, k_0 = schedule_radius(consts, V, k)
    r_sched = r_k if k >= k_0 else schedule_radius(consts, V, k_0)[0]
    case = "k0_is_1" if k_0 == 1 else ("k_ge_k0" if k >= k_0 else "k_lt_k0")
    r, source = _pipeline_radius(work, N, r_sched, work.estimate_covering_constant)

    fam = corollary1_family(work, maximizer, N, r)
    selected = q_filter(work, fam, V, k)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        fns = list(pool.map(lambda A: plateau(work, A, r), fam.sets))
    cg = c_geom(work)
    lemma = [rayleigh_bound_lemma2(work, A, r, fn) for A, fn in zip(fam.sets, fns)]
    minmax = eigen_upper_bounds(work, fns)
    m = min(N, work.n_points)
    spec = space_spectrum(work, m, tol)
    lam = spec.eigenvalues

    collar_cap = 4 * fam.C_hat * cg / r**2
    checks = [*fam.report]
    checks.append(holds("q-filter keeps k sets", len(selected) == k))
    checks.append(at_most("max Lipschitz excess |f_u - f_v| - l/r",
                          max(lipschitz_violation(work, fn) for fn in fns), 1e-12))
    checks.append(holds("R(f_i) <= collar bound for every plateau",
                        all(fn.rayleigh <= b for fn, b in zip(fns, lemma))))
    checks.append(at_most("max selected R(f_i) <= 4 C c_geom / r^2",
                          max(fns[i].rayleigh for i in selected), collar_cap))
    slack = minmax[:m] - lam[:m]
    checks.append(holds("lambda_m <= max_{i<=m} R(f_i) for all m", bool(np.all(slack >= -MINMAX_SLACK))))

    lam_k = float(lam[k - 1]) * lam_scale if k <= len(lam) else math.nan
    theorem = bound_theorem2(consts, a, V_orig, k)
    minmax_k = float(minmax[k - 1]) * lam_scale
    certified = min(theorem, minmax_k)
    checks.append(at_most("lambda_k <= A_n a^2 + B_n (k/V)^(2/n)", lam_k, theorem))
    checks.append(at_most("lambda_k <= certified bound", lam_k, certified))
    weyl = (k / V_orig) ** (2 / n)
    checks.append(at_most("certified / (k/V)^(2/n) <= B_n + A_n a^2 (V/k)^(2/n)",
                          certified / weyl, consts.B_n + consts.A_n * a**2 / weyl))

    passed = all_passed(checks)
    report = {
        "a": a,
        "k": k,
        "N": N,
        "n": n,
        "variant": consts.variant,
        "constants": consts.to_dict(),
        "scale": t,
        "V": V_orig,
        "V_normalized": V,
        "schedule": {"r_k": r_k, "k_0": k_0, "case": case, "r_schedule": r_sched,
                     "A_term": 0.0 if k_0 == 1 else consts.A_n * a**2},
        "r": r / t,
        "r_normalized": r,
        "radius_source": source,
        "h": work.max_edge_length / t,
        "C_hat": fam.C_hat,
        "c_geom": cg,
        "alpha_normalized": fam.alpha,
        "family": {
            "sizes": [len(A) for A in fam.sets],
            "measures_normalized": fam.measures,
            "enclosure_measures_normalized": [D.measure for D in fam.enclosures],
            "strategy": fam.strategy,
            "verification": [c.to_dict() for c in fam.report],
        },
        "selected": selected,
        "quotients": [
            {"index": i, "selected": i in selected, "rayleigh": fn.rayleigh * lam_scale,
             "collar_bound": b * lam_scale, "core_size": len(fn.core),
             "support_measure_normalized": fn.support.measure}
            for i, (fn, b) in enumerate(zip(fns, lemma))
        ],
        "minmax": [
            {"m": j + 1, "lambda": float(lam[j]) * lam_scale, "bound": float(minmax[j]) * lam_scale,
             "slack": float(slack[j]) * lam_scale}
            for j in range(m)
        ],
        "spectrum": {"method": spec.method, "max_residual": float(spec.residuals.max())},
        "lambda_k": lam_k,
        "bound_theorem": theorem,
        "bound_minmax": minmax_k,
        "certified_bound": certified,
        "checks": [c.to_dict() for c in checks],
        "pass": passed,
    }
    return PipelineResult(report=report, family=fam, plateaus=fns, spectrum=spec, space=work, checks=checks)


def theorem2_sweep(space: MetricMeasureSpace, consts: GeometryConstants, a: float, kmax: int,
                   tol: float = 1e-9) -> list[dict]:
    """``lambda_k`` against ``A_n a^2 + B_n (k/V)^(2/n)`` for ``k = 1..kmax``."""
    if kmax < 1:
        raise DomainError("kmax must be >= 1")
    m = min(kmax, space.n_points)
    lam = space_spectrum(space, m, tol).eigenvalues
    V = space.omega
    rows = []
    for k in range(1, m + 1):
        b = bound_theorem2(consts, a, V, k)
        rows.append({"k": k, "lambda": float(lam[k - 1]), "bound": b, "pass": bool(lam[k - 1] <= b)})
    return rows


__all__ = [
    "PlateauFunction", "PipelineResult", "c_geom", "plateau", "dirichlet_energy",
    "lipschitz_violation", "rayleigh_bound_lemma2", "q_filter", "eigen_upper_bounds",
    "theorem2_pipeline", "theorem2_sweep", "worker_count",
]
