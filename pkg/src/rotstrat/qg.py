"""Potential vorticity and the quasi-geostrophic / oscillating split.

For ``U = (v1, v2, v3, theta)`` the potential vorticity is
``Omega(U) = d1 v2 - d2 v1 - F d3 theta`` and the quasi-geostrophic part is
``Q U = (-d2, d1, 0, -F d3) Delta_F^{-1} Omega(U)`` with
``Delta_F = d1^2 + d2^2 + F^2 d3^2``. Per mode ``Q`` is the rank-one
orthogonal projector ``a a^T / |xi|_F^2`` with ``a = (-xi2, xi1, 0, -F xi3)``.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .spectral import PhysicalParams, TorusGrid, inner

__all__ = [
    "QGDecomposition",
    "xi_F_sq",
    "potential_vorticity",
    "deltaF",
    "deltaF_inverse",
    "q_reconstruct",
    "q_project",
    "p_project",
    "decompose",
    "q_symbol",
    "gamma_multiplier",
]


@dataclasses.dataclass(frozen=True)
class QGDecomposition:
    qg_part: np.ndarray
    osc_part: np.ndarray

    def check(self, grid: TorusGrid, params: PhysicalParams, tol: float = 1e-12) -> None:
        """Raise if the stored parts violate the split invariants."""
        total = self.qg_part + self.osc_part
        scale = float(np.max(np.abs(total))) or 1.0
        pv = potential_vorticity(self.osc_part, grid, params)
        pv_scale = float(np.max(np.abs(potential_vorticity(total, grid, params)))) or 1.0
        if np.max(np.abs(pv)) > tol * pv_scale:
            raise ValueError("oscillating part carries potential vorticity")
        if np.max(np.abs(q_project(self.qg_part, grid, params) - self.qg_part)) > tol * scale:
            raise ValueError("qg part is not a fixed point of Q")
        cross = abs(inner(self.qg_part, self.osc_part, grid))
        norms = abs(inner(total, total, grid)) or 1.0
        if cross > tol * norms:
            raise ValueError("parts are not L2-orthogonal")


def xi_F_sq(xi1, xi2, xi3, froude: float):
    """``|xi|_F^2 = xi1^2 + xi2^2 + F^2 xi3^2``."""
    return xi1**2 + xi2**2 + froude**2 * xi3**2


def _inv_xi_F_sq(grid: TorusGrid, froude: float) -> np.ndarray:
    q = xi_F_sq(*grid.xi, froude)
    out = np.zeros(grid.shape)
    np.divide(1.0, q, out=out, where=q > 0)
    return out


def potential_vorticity(u: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    x1, x2, x3 = grid.xi
    return 1j * (x1 * u[1] - x2 * u[0]) - 1j * params.froude * x3 * u[3]


def deltaF(f: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    return -xi_F_sq(*grid.xi, params.froude) * f


def deltaF_inverse(f: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    """Inverse of ``Delta_F`` on mean-free fields; the zero mode goes to 0."""
    return -_inv_xi_F_sq(grid, params.froude) * f


def q_reconstruct(omega: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    """Quasi-geostrophic state with potential vorticity ``omega``."""
    x1, x2, x3 = grid.xi
    psi = deltaF_inverse(omega, grid, params)
    out = np.empty((4,) + grid.shape, dtype=complex)
    out[0] = -1j * x2 * psi
    out[1] = 1j * x1 * psi
    out[2] = 0.0
    out[3] = -1j * params.froude * x3 * psi
    return out


def q_project(u: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    return q_reconstruct(potential_vorticity(u, grid, params), grid, params)


def p_project(u: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    return u - q_project(u, grid, params)


def decompose(u: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> QGDecomposition:
    qg = q_project(u, grid, params)
    return QGDecomposition(qg, u - qg)


def q_symbol(xi: np.ndarray, froude: float) -> np.ndarray:
    """4x4 symbol of ``Q`` at a single nonzero frequency."""
    x1, x2, x3 = (float(c) for c in xi)
    a = np.array([-x2, x1, 0.0, -froude * x3])
    return np.outer(a, a) / xi_F_sq(x1, x2, x3, froude)


def gamma_multiplier(params: PhysicalParams):
    """Symbol of the limit diffusion ``Gamma = Delta Delta_F^{-1} (nu d1^2 + nu d2^2 + nu' F^2 d3^2)``.

    The returned callable maps ``(xi1, xi2, xi3)`` to
    ``-|xi|^2 (nu xi1^2 + nu xi2^2 + nu' F^2 xi3^2) / |xi|_F^2``, which is 0 at
    the zero mode.
    """
    nu, nup, fr = params.nu, params.nu_prime, params.froude

    def symbol(xi1, xi2, xi3):
        xi1, xi2, xi3 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (xi1, xi2, xi3)))
        sq = xi1**2 + xi2**2 + xi3**2
        q = xi_F_sq(xi1, xi2, xi3, fr)
        num = sq * (nu * (xi1**2 + xi2**2) + nup * fr**2 * xi3**2)
        out = np.zeros(q.shape)
        np.divide(-num, q, out=out, where=q > 0)
        return out if out.ndim else float(out)

    return symbol
