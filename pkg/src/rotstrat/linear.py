"""Exact linear flow of the penalised system ``d_t f - nu Delta f + (1/eps) P A f = F_ext``.

Per Fourier mode the generator is the 4x4 matrix ``B(xi, eps)``. On the
divergence-free subspace it has the three eigenvalues

* ``mu = -nu |xi|^2`` (quasi-geostrophic direction),
* ``lambda = -nu |xi|^2 + i |xi|_F / (eps F |xi|)`` and its conjugate,

with mutually orthogonal rank-one projectors. Eigenvalues are closed form;
eigenvectors are obtained numerically from a Hermitian 3x3 problem in an
orthonormal basis of the divergence-free subspace.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from typing import Sequence

import numpy as np

from .spectral import PhysicalParams, TorusGrid, leray_project
from .qg import xi_F_sq

__all__ = [
    "EigenSystem",
    "ForcingSamples",
    "LinearPropagator",
    "assemble_B",
    "b_matrix_field",
    "eigenvalues",
    "eigensystem",
    "apply_A",
    "apply_linear",
    "phi_functions",
    "propagate",
]


def _b_entries(x1, x2, x3, params: PhysicalParams) -> np.ndarray:
    """Entries of ``B(xi, eps)`` stacked as ``(4, 4, ...)``; ``xi`` must be nonzero."""
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (x1, x2, x3)))
    eps, fr, nu = params.epsilon, params.froude, params.nu
    sq = x1**2 + x2**2 + x3**2
    d = -nu * sq
    e = 1.0 / (eps * sq)
    zero = np.zeros_like(sq)
    return np.array(
        [
            [d + x1 * x2 * e, (x2**2 + x3**2) * e, zero, x1 * x3 * e / fr],
            [-(x1**2 + x3**2) * e, d - x1 * x2 * e, zero, x2 * x3 * e / fr],
            [x2 * x3 * e, -x1 * x3 * e, d, -(x1**2 + x2**2) * e / fr],
            [zero, zero, zero + 1.0 / (eps * fr), d],
        ]
    )


def assemble_B(xi: Sequence[float], params: PhysicalParams) -> np.ndarray:
    """The 4x4 mode matrix at a single nonzero frequency."""
    params.require_equal_viscosities()
    x1, x2, x3 = (float(c) for c in xi)
    if x1 == 0 and x2 == 0 and x3 == 0:
        raise ValueError("B is undefined at xi = 0")
    return _b_entries(x1, x2, x3, params)


def b_matrix_field(grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    """``B`` on every lattice mode, shape ``(4, 4, n, n, n)``; zero at the zero mode."""
    params.require_equal_viscosities()
    x1, x2, x3 = (np.broadcast_to(c, grid.shape) for c in grid.xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = _b_entries(x1, x2, x3, params)
    b[..., 0, 0, 0] = 0.0
    return b


def apply_A(u: np.ndarray, froude: float) -> np.ndarray:
    """Pointwise skew matrix ``A u = (-v2, v1, theta/F, -v3/F)``."""
    return np.stack([-u[1], u[0], u[3] / froude, -u[2] / froude])


def apply_linear(u: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    """``nu Delta u - (1/eps) P A u`` evaluated in field form (no eigenvectors)."""
    return -params.nu * grid.xi_sq * u - leray_project(apply_A(u, params.froude), grid) / params.epsilon


def eigenvalues(xi: Sequence[float], params: PhysicalParams) -> tuple[complex, complex, complex]:
    """Closed-form ``(mu, lambda, conj(lambda))``."""
    x1, x2, x3 = (float(c) for c in xi)
    sq = x1 * x1 + x2 * x2 + x3 * x3
    if sq == 0:
        raise ValueError("eigenvalues are undefined at xi = 0")
    mu = -params.nu * sq
    omega = math.sqrt(xi_F_sq(x1, x2, x3, params.froude)) / (params.epsilon * params.froude * math.sqrt(sq))
    return complex(mu), complex(mu, omega), complex(mu, -omega)


def _divfree_basis(x1, x2, x3) -> np.ndarray:
    """Orthonormal basis of ``{w : xi . w_{1:3} = 0}``, shape ``(..., 4, 3)``."""
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (x1, x2, x3)))
    rh = np.hypot(x1, x2)
    r = np.sqrt(rh**2 + x3**2)
    vertical = rh == 0
    safe_rh = np.where(vertical, 1.0, rh)
    safe_r = np.where(r == 0, 1.0, r)
    # horizontal direction orthogonal to xi_h, e1 when xi_h = 0
    a1 = np.where(vertical, 1.0, -x2 / safe_rh)
    a2 = np.where(vertical, 0.0, x1 / safe_rh)
    # xi x a / |xi|
    b1 = (x2 * 0.0 - x3 * a2) / safe_r
    b2 = (x3 * a1 - x1 * 0.0) / safe_r
    b3 = (x1 * a2 - x2 * a1) / safe_r
    z = np.zeros_like(x1)
    basis = np.stack(
        [
            np.stack([a1, a2, z, z], axis=-1),
            np.stack([b1, b2, b3, z], axis=-1),
            np.stack([z, z, z, z + 1.0], axis=-1),
        ],
        axis=-1,
    )
    return basis


def _eigenvectors(x1, x2, x3, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """Unit eigenvectors ordered (QG, lambda, conj lambda), shape ``(..., 4, 3)``.

    Also returns the numerical frequencies ``kappa`` with ``eps (B + nu|xi|^2) w = i kappa w``.
    """
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (x1, x2, x3)))
    unit = params.replace(epsilon=1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = _b_entries(x1, x2, x3, unit)
    sq = x1**2 + x2**2 + x3**2
    b = b + unit.nu * sq * np.eye(4).reshape((4, 4) + (1,) * sq.ndim)
    b = np.where(sq > 0, b, 0.0)
    b = np.moveaxis(b, (0, 1), (-2, -1))
    v = _divfree_basis(x1, x2, x3)
    m = np.swapaxes(v, -1, -2) @ b @ v
    # m is real skew on the subspace, so -i m is Hermitian
    h = -1j * m
    h = 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))
    kappa, y = np.linalg.eigh(h)
    order = [1, 2, 0]
    return v @ y[..., order], kappa[..., order]


@dataclasses.dataclass(frozen=True)
class EigenSystem:
    mu: complex
    lam: complex
    lam_bar: complex
    projectors: np.ndarray  # (3, 4, 4): P2 (QG), P3 (lambda), P4 (conj lambda)

    @property
    def values(self) -> tuple[complex, complex, complex]:
        return (self.mu, self.lam, self.lam_bar)

    def check(self, tol: float = 1e-10) -> None:
        p = self.projectors
        for i in range(3):
            for j in range(3):
                want = p[i] if i == j else 0.0
                if np.max(np.abs(p[i] @ p[j] - want)) > tol:
                    raise ValueError(f"projectors {i}, {j} are not mutually annihilating idempotents")
            if abs(np.linalg.norm(p[i], 2) - 1.0) > tol:
                raise ValueError("projector does not have unit norm")


def eigensystem(xi: Sequence[float], params: PhysicalParams) -> EigenSystem:
    """Closed-form eigenvalues and numerically built projectors at one mode."""
    params.require_equal_viscosities()
    mu, lam, lam_bar = eigenvalues(xi, params)
    if lam.imag == 0:
        raise RuntimeError("degenerate dispersion relation; this cannot happen for xi != 0")
    vecs, _ = _eigenvectors(*(float(c) for c in xi), params)
    proj = np.einsum("ai,bi->iab", vecs, np.conj(vecs))
    return EigenSystem(mu, lam, lam_bar, proj)


def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1(z) = (e^z - 1)/z`` and ``phi2(z) = (e^z - 1 - z)/z^2`` without cancellation."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    zs = np.where(small, z, 0.0)
    p1 = np.zeros_like(z)
    p2 = np.zeros_like(z)
    term = np.ones_like(z)
    fact1, fact2 = 1.0, 2.0
    for k in range(20):
        p1 += term / fact1
        p2 += term / fact2
        term = term * zs
        fact1 *= k + 2
        fact2 *= k + 3
    zl = np.where(small, 1.0, z)
    ez = np.exp(zl)
    p1 = np.where(small, p1, (ez - 1.0) / zl)
    p2 = np.where(small, p2, (ez - 1.0 - zl) / zl**2)
    return p1, p2


@dataclasses.dataclass(frozen=True)
class ForcingSamples:
    """Forcing values on an increasing time grid, interpolated linearly in between."""

    times: np.ndarray
    values: np.ndarray  # (K, 4, n, n, n)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("forcing times must be increasing with at least two samples")
        if len(self.values) != len(t):
            raise ValueError("one forcing sample per time is required")


class LinearPropagator:
    """Exact per-mode flow on the divergence-free subspace.

    Eigenvectors are computed once per lattice and stored as ``(3, 4, n, n, n)``.
    The zero mode is held fixed.
    """

    def __init__(self, grid: TorusGrid, params: PhysicalParams):
        params.require_equal_viscosities()
        self.grid = grid
        self.params = params
        x1, x2, x3 = (np.broadcast_to(c, grid.shape) for c in grid.xi)
        vecs, kappa = _eigenvectors(x1, x2, x3, params)
        self.vectors = np.ascontiguousarray(np.moveaxis(vecs, (-1, -2), (0, 1)))
        self.kappa = np.moveaxis(kappa, -1, 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            omega = np.sqrt(xi_F_sq(x1, x2, x3, params.froude)) / (params.froude * grid.xi_norm)
        omega[0, 0, 0] = 0.0
        mu = -params.nu * grid.xi_sq
        self.rates = np.stack([mu + 0j, mu + 1j * omega / params.epsilon, mu - 1j * omega / params.epsilon])
        self.rates[:, 0, 0, 0] = 0.0
        self._cache: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._conj: np.ndarray | None = None

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Eigen-coordinates ``w_i^H f`` per mode, shape ``(3, n, n, n)``."""
        if self._conj is None:
            self._conj = np.conj(self.vectors)
        return np.einsum("ia...,a...->i...", self._conj, f)

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("ia...,i...->a...", self.vectors, c)

    def _factors(self, h: float):
        key = float(h)
        if key not in self._cache:
            z = self.rates * h
            p1, p2 = phi_functions(z)
            self._cache[key] = (np.exp(z), h * p1, h * p2)
            if len(self._cache) > 8:
                self._cache.pop(next(iter(self._cache)))
        return self._cache[key]

    def _restore_mean(self, out: np.ndarray, f: np.ndarray) -> np.ndarray:
        out[:, 0, 0, 0] = f[:, 0, 0, 0]
        return out

    def apply(self, f: np.ndarray, t: float) -> np.ndarray:
        """Unforced flow ``exp(t B) f``."""
        if t == 0:
            return f.copy()
        e, _, _ = self._factors(t)
        return self._restore_mean(self.synthesize(e * self.coefficients(f)), f)

    def step(self, f: np.ndarray, h: float, g0: np.ndarray | None = None, g1: np.ndarray | None = None) -> np.ndarray:
        """Advance by ``h`` with forcing linear between ``g0`` (start) and ``g1`` (end)."""
        e, p1, p2 = self._factors(h)
        c = e * self.coefficients(f)
        if g0 is not None:
            c0 = self.coefficients(g0)
            c1 = c0 if g1 is None else self.coefficients(g1)
            c += p1 * c0 + p2 * (c1 - c0)
        return self._restore_mean(self.synthesize(c), f)

    def propagate(self, f0: np.ndarray, t: float, forcing: ForcingSamples | None = None) -> np.ndarray:
        if t < 0:
            raise ValueError("t must be nonnegative")
        if forcing is None or t == 0:
            return self.apply(f0, t)
        times = forcing.times
        if times[0] > 0 or times[-1] < t * (1 - 1e-14):
            raise ValueError(f"forcing samples cover [{times[0]}, {times[-1]}], need [0, {t}]")
        coeffs = self.coefficients(f0)
        k = int(np.searchsorted(times, 0.0, side="right")) - 1
        now = 0.0
        while now < t:
            t0, t1 = times[k], times[k + 1]
            end = min(t1, t)
            h = end - now
            if h > 0:
                ga = forcing.values[k] + (forcing.values[k + 1] - forcing.values[k]) * ((now - t0) / (t1 - t0))
                gb = forcing.values[k] + (forcing.values[k + 1] - forcing.values[k]) * ((end - t0) / (t1 - t0))
                e, p1, p2 = self._factors(h)
                c0 = self.coefficients(ga)
                coeffs = e * coeffs + p1 * c0 + p2 * (self.coefficients(gb) - c0)
            now = end
            k += 1
        return self._restore_mean(self.synthesize(coeffs), f0)


@functools.lru_cache(maxsize=8)
def _propagator(grid: TorusGrid, params: PhysicalParams) -> LinearPropagator:
    return LinearPropagator(grid, params)


def propagate(
    f0: np.ndarray,
    t: float,
    grid: TorusGrid,
    params: PhysicalParams,
    forcing: ForcingSamples | None = None,
) -> np.ndarray:
    """Solve the linear system exactly up to time ``t`` (forcing piecewise linear)."""
    return _propagator(grid, params).propagate(f0, t, forcing)
