"""Comparison-geometry constants and the eigenvalue bound formulas.

Everything here is closed-form or a one-dimensional quadrature.  Volumes
``v_a(r)`` are those of geodesic balls in the simply connected space form of
constant sectional curvature ``-a**2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError

COVERING_GRID = 256


def unit_ball_volume(n: int) -> float:
    """Euclidean volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^(n-1) in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def comparison_volume(n: int, a: float, r: float) -> float:
    """Volume of a ball of radius ``r`` in the n-dimensional space form of
    curvature ``-a**2``.

    For ``a > 0`` this is ``|S^(n-1)| * int_0^r (sinh(a t)/a)**(n-1) dt``,
    integrated adaptively; ``a == 0`` uses the Euclidean closed form.
    """
    if n < 1:
        raise DomainError("dimension must be >= 1")
    if r < 0:
        raise DomainError("radius must be nonnegative")
    if a < 0:
        raise DomainError("curvature parameter a must be nonnegative")
    if r == 0:
        return 0.0
    if a == 0:
        return unit_ball_volume(n) * r**n
    if n == 1:
        return 2.0 * r
    val, _ = integrate.quad(
        lambda t: (math.sinh(a * t) / a) ** (n - 1), 0.0, r, epsabs=0.0, epsrel=1e-13, limit=200
    )
    return sphere_area(n) * val


def _covering_term(n: int, a: float, t: float) -> int:
    return 1 + math.floor(comparison_volume(n, a, 4.5 * t) / comparison_volume(n, a, 0.5 * t))


def covering_constant(n: int, a: float, r: float) -> int:
    """``C(a, r) = max_{0 < t <= r} 1 + floor(v_a(4.5 t) / v_a(t/2))``.

    The maximum is taken over a log-spaced grid on ``(0, r]`` together with
    the ``t -> 0`` limit, where the ratio tends to ``9**n``.
    """
    if r <= 0:
        raise DomainError("r must be positive")
    limit = 1 + 9**n
    if a == 0:
        # ratio is exactly 9**n at every scale
        return limit
    ts = np.geomspace(r * 1e-6, r, COVERING_GRID)
    return max(limit, max(_covering_term(n, a, float(t)) for t in ts))


def omega_prime(n: int) -> float:
    """Smallest ``w`` with ``v_1(r) <= w r**n`` for all ``0 < r <= 1``.

    ``v_1(r) / r**n`` increases with r, so the supremum is attained at r = 1.
    """
    if n < 1:
        raise DomainError("dimension must be >= 1")
    return comparison_volume(n, 1.0, 1.0)


def constant_A(C1: float, n: int) -> float:
    return 4 * C1 * 2 ** (2 / n)


def constant_B(C1: float, omega: float, n: int) -> float:
    return 4 * C1 * (8 * C1**2 * omega) ** (2 / n)


@dataclass(frozen=True)
class GeometryConstants:
    """Constants of the Neumann bound ``A_n a^2 + B_n (k/V)^(2/n)``.

    ``variant`` is ``"hyperbolic"`` (normalized curvature ``a = 1``) or
    ``"euclidean"`` (``a = 0``, with ``C(0, 1) = 1 + 9**n`` and the Euclidean
    unit-ball volume in place of ``omega_prime``).
    """

    n: int
    a: float
    C1: int
    omega_prime_n: float
    A_n: float
    B_n: float
    variant: str = "hyperbolic"

    def to_dict(self) -> dict:
        return asdict(self)


def theorem2_constants(n: int, variant: str = "hyperbolic") -> GeometryConstants:
    if n < 1:
        raise DomainError("dimension must be >= 1")
    if variant == "hyperbolic":
        a = 1.0
        C1 = covering_constant(n, 1.0, 1.0)
        w = omega_prime(n)
    elif variant == "euclidean":
        a = 0.0
        C1 = covering_constant(n, 0.0, 1.0)
        w = unit_ball_volume(n)
    else:
        raise DomainError(f"unknown constants variant {variant!r}")
    return GeometryConstants(
        n=n, a=a, C1=C1, omega_prime_n=w, A_n=constant_A(C1, n), B_n=constant_B(C1, w, n), variant=variant
    )


def bound_theorem2(consts: GeometryConstants, a: float, V: float, k: int) -> float:
    """``A_n a^2 + B_n (k/V)^(2/n)``."""
    if not V > 0:
        raise DomainError("volume must be positive")
    if k < 1:
        raise DomainError("k must be >= 1")
    if a < 0:
        raise DomainError("a must be nonnegative")
    return consts.A_n * a**2 + consts.B_n * (k / V) ** (2 / consts.n)


def bound_buser(n: int, C_n: float, a: float, V: float, k: int) -> float:
    """Buser-type bound ``(n-1)^2/4 a^2 + C_n (k/V)^(2/n)``; ``C_n`` is caller-supplied."""
    if C_n < 1:
        raise DomainError("C_n must be >= 1")
    if not V > 0:
        raise DomainError("volume must be positive")
    if k < 1:
        raise DomainError("k must be >= 1")
    return (n - 1) ** 2 / 4 * a**2 + C_n * (k / V) ** (2 / n)


def schedule_radius(consts: GeometryConstants, V: float, k: int) -> tuple[float, int]:
    """Radius ``r_k`` and threshold index ``k_0`` of the packing schedule.

    ``8 C(1)^2 omega' r_k^n = V/k`` and ``k_0 = floor(V / (8 C(1)^2 omega')) + 1``;
    for ``k >= k_0`` the radius satisfies ``r_k <= 1``.
    """
    if not V > 0:
        raise DomainError("volume must be positive")
    if k < 1:
        raise DomainError("k must be >= 1")
    scale = 8 * consts.C1**2 * consts.omega_prime_n
    r_k = (V / k / scale) ** (1 / consts.n)
    k_0 = math.floor(V / scale) + 1
    if k >= k_0:
        assert r_k <= 1.0, (r_k, k, k_0)
    return r_k, k_0
