"""Discrete Neumann Laplacian and its lowest eigenvalues.

The operator is the weighted graph Laplacian ``L`` paired with the diagonal
mass matrix ``M = diag(mu)``; eigenpairs solve ``L x = lam M x``.  Because the
same measure enters Rayleigh quotients, min-max bounds built from test
functions compare directly with these eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .domains import grid
from .errors import ConvergenceError, DomainError
from .mmspace import MetricMeasureSpace

DENSE_SOLVER_LIMIT = 600


@dataclass
class DiscreteLaplacian:
    L: sparse.csr_matrix
    mass: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def energy(self, f: np.ndarray) -> float:
        return float(f @ (self.L @ f))


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    method: str
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
        }


def assemble(space: MetricMeasureSpace) -> DiscreteLaplacian:
    """``L_uv = -w_uv``, ``L_uu = sum_v w_uv``."""
    e = space.edges
    if len(e) == 0:
        raise DomainError("space has no edges; the Dirichlet form is undefined")
    P = space.n_points
    w = space.weights
    u, v = e[:, 0], e[:, 1]
    rows = np.concatenate([u, v, u, v])
    cols = np.concatenate([v, u, u, v])
    vals = np.concatenate([-w, -w, w, w])
    L = sparse.coo_matrix((vals, (rows, cols)), shape=(P, P)).tocsr()
    L.sum_duplicates()
    L.sort_indices()
    return DiscreteLaplacian(L=L, mass=np.array(space.measure))


def _start_vector(lap: DiscreteLaplacian) -> np.ndarray:
    v = np.cos(0.618 * np.arange(lap.n) + 0.3) + 0.5 * np.sin(1.7 * np.arange(lap.n))
    mu = lap.mass
    return v - (v @ mu) / mu.sum()


def _residuals(lap: DiscreteLaplacian, vals, vecs) -> np.ndarray:
    R = lap.L @ vecs - (lap.mass[:, None] * vecs) * vals[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(vecs, axis=0)


def eigenvalues(
    lap: DiscreteLaplacian,
    m: int,
    tol: float = 1e-9,
    *,
    method: str = "auto",
    return_vectors: bool = False,
) -> SpectrumResult:
    """Lowest ``m`` eigenvalues of ``L x = lam M x``.

    ``method="auto"`` uses dense LAPACK for ``n <= 600`` and shift-invert
    Lanczos (ARPACK) with a negative shift otherwise.  A pair is accepted
    when ``||Lx - lam Mx|| <= tol * (||L||_1 + |lam| max(mu)) ||x||``; the
    reported residuals are the absolute ``||Lx - lam Mx|| / ||x||``.
    """
    n = lap.n
    if not 1 <= m <= n:
        raise DomainError(f"m must lie in [1, {n}]")
    if not tol > 0:
        raise DomainError("tol must be positive")
    if np.any(lap.mass <= 0):
        raise DomainError("the mass matrix must be positive definite for the eigenproblem")
    if method == "auto":
        method = "dense" if n <= DENSE_SOLVER_LIMIT else "lanczos"

    if method == "dense" or (method == "lanczos" and m >= n - 1):
        vals, vecs = scipy.linalg.eigh(lap.L.toarray(), np.diag(lap.mass), subset_by_index=[0, m - 1])
        method = "dense"
    elif method == "lanczos":
        diag_ratio = lap.L.diagonal() / lap.mass
        sigma = -1e-2 * float(np.mean(diag_ratio)) or -1e-2
        try:
            vals, vecs = eigsh(
                lap.L.tocsc(), k=m, M=sparse.diags(lap.mass).tocsc(), sigma=sigma, which="LM",
                v0=_start_vector(lap), tol=tol * 1e-3, maxiter=max(1000, 20 * n),
            )
        except ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"shift-invert Lanczos: {len(exc.eigenvalues)} of {m} pairs converged"
            ) from None
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    else:
        raise DomainError(f"unknown eigensolver method {method!r}")

    res = _residuals(lap, vals, vecs)
    scale = abs(lap.L).sum(axis=0).max() + np.abs(vals) * lap.mass.max()
    bad = res > tol * np.asarray(scale).ravel()
    if bad.any():
        raise ConvergenceError(
            f"{method}: residual {res[bad].max():.3e} exceeds tolerance for {int(bad.sum())} pairs"
        )
    return SpectrumResult(
        eigenvalues=vals, residuals=res, method=method, eigenvectors=vecs if return_vectors else None
    )


def space_spectrum(space: MetricMeasureSpace, m: int, tol: float = 1e-9, **kw) -> SpectrumResult:
    return eigenvalues(assemble(space), min(m, space.n_points), tol, **kw)


def continuum_neumann(Lx: float, Ly: float, count: int) -> np.ndarray:
    """Lowest ``count`` Neumann eigenvalues ``pi^2 (p^2/Lx^2 + q^2/Ly^2)`` of a rectangle."""
    top = int(math.isqrt(count)) + 2 + count
    vals = sorted(
        math.pi**2 * (p * p / Lx**2 + q * q / Ly**2) for p in range(top) for q in range(top)
    )
    return np.array(vals[:count])


def continuum_check(Lx: float = 1.0, Ly: float = 1.0, h: float = 1 / 64, count: int = 7) -> list[dict]:
    """Compare grid eigenvalues on the ``Lx x Ly`` rectangle with the
    continuum Neumann spectrum; one row per eigenvalue."""
    if not (Lx > 0 and Ly > 0 and h > 0):
        raise DomainError("rectangle sides and h must be positive")
    nx, ny = Lx / h, Ly / h
    if abs(nx - round(nx)) > 1e-9 * nx or abs(ny - round(ny)) > 1e-9 * ny:
        raise DomainError("h must divide both sides of the rectangle")
    space = grid((int(round(nx)) + 1, int(round(ny)) + 1), h)
    got = space_spectrum(space, count).eigenvalues
    want = continuum_neumann(Lx, Ly, count)
    rows = []
    for j, (d, c) in enumerate(zip(got, want), start=1):
        rows.append({
            "k": j,
            "discrete": float(d),
            "continuum": float(c),
            "rel_error": float(abs(d - c) / c) if c > 0 else float(abs(d)),
        })
    return rows
