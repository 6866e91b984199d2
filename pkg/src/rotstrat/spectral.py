"""Periodic spectral substrate.

A :class:`TorusGrid` carries the frequency lattice ``2*pi*k/L`` for
``k in [-n/2, n/2)^3`` stored in FFT order. Fields are numpy arrays of
Fourier-series coefficients with shape ``(c, n, n, n)`` (or ``(n, n, n)``
for scalars), so that the plane wave ``exp(i xi.x)`` has coefficient 1.
Norms are box integrals, e.g. ``||u||_{L^2}^2 = L^3 sum |c_k|^2``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import struct
from pathlib import Path
from typing import Callable, Union

import numpy as np
import scipy.fft

__all__ = [
    "PhysicalParams",
    "TorusGrid",
    "transform",
    "forward",
    "backward",
    "forward_real",
    "backward_real",
    "apply_multiplier",
    "abs_derivative",
    "laplacian",
    "heat_flow",
    "gradient",
    "divergence",
    "leray_project",
    "inner",
    "l2_norm",
    "hs_norm",
    "random_field",
    "random_state",
    "check_state",
    "write_snapshot",
    "read_snapshot",
]

Symbol = Callable[[np.ndarray, np.ndarray, np.ndarray], Union[np.ndarray, complex, float]]


@dataclasses.dataclass(frozen=True)
class PhysicalParams:
    """Rossby number, Froude number and viscosities.

    ``nu_prime`` defaults to ``nu``; everything downstream of the
    eigensystem requires the two to coincide.
    """

    epsilon: float
    froude: float
    nu: float
    nu_prime: float | None = None

    def __post_init__(self):
        if self.nu_prime is None:
            object.__setattr__(self, "nu_prime", self.nu)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.froude > 0 or self.froude == 1:
            raise ValueError(f"froude must be positive and different from 1, got {self.froude}")
        if not (self.nu > 0 and self.nu_prime > 0):
            raise ValueError("viscosities must be positive")

    @property
    def equal_viscosities(self) -> bool:
        return self.nu == self.nu_prime

    def require_equal_viscosities(self) -> None:
        if not self.equal_viscosities:
            raise ValueError("only the nu == nu_prime case is supported here")

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class TorusGrid:
    """Cubic periodic box of side ``box_length`` with ``n`` modes per axis."""

    n: int
    box_length: float = 2 * math.pi

    def __post_init__(self):
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"n must be a positive even integer, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spacing(self) -> float:
        """Lattice spacing ``2*pi/L`` in frequency."""
        return 2 * math.pi / self.box_length

    @property
    def volume(self) -> float:
        return self.box_length**3

    @functools.cached_property
    def index(self) -> np.ndarray:
        """Integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)

    @functools.cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable frequency components ``(xi1, xi2, xi3)``."""
        k = self.spacing * self.index.astype(float)
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @functools.cached_property
    def xi_sq(self) -> np.ndarray:
        x1, x2, x3 = self.xi
        return x1**2 + x2**2 + x3**2

    @functools.cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @functools.cached_property
    def inv_xi_sq(self) -> np.ndarray:
        """``1/|xi|^2`` with the zero mode set to 0."""
        out = np.zeros(self.shape)
        np.divide(1.0, self.xi_sq, out=out, where=self.xi_sq > 0)
        return out

    @functools.cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates of the sample points."""
        p = np.arange(self.n) * (self.box_length / self.n)
        return (p[:, None, None], p[None, :, None], p[None, None, :])

    def dealias_mask(self, fraction: float = 2 / 3) -> np.ndarray:
        """Boolean mask keeping ``|k_i| < fraction * n / 2`` on every axis."""
        keep = np.abs(self.index) < fraction * self.n / 2
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def _check(self, arr: np.ndarray) -> None:
        if arr.shape[-3:] != self.shape:
            raise ValueError(f"field shape {arr.shape} does not match grid {self.shape}")


# -- transforms ---------------------------------------------------------------


def forward(samples: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Physical samples to Fourier-series coefficients over the last 3 axes."""
    grid._check(samples)
    return scipy.fft.fftn(samples, axes=(-3, -2, -1), norm="forward")


def backward(coeffs: np.ndarray, grid: TorusGrid, real: bool = False) -> np.ndarray:
    """Fourier-series coefficients to physical samples.

    With ``real=True`` the (roundoff-level) imaginary part is dropped.
    """
    grid._check(coeffs)
    out = scipy.fft.ifftn(coeffs, axes=(-3, -2, -1), norm="forward")
    return out.real if real else out


@functools.lru_cache(maxsize=8)
def _hermitian_tail_index(n: int) -> np.ndarray:
    """Flat indices into an ``(n, n, n//2+1)`` half spectrum giving the modes ``-k`` for ``k3 > n/2``."""
    m = n // 2 + 1
    neg = (-np.arange(n)) % n
    k3 = n - np.arange(m, n)
    return (neg[:, None, None] * n * m + neg[None, :, None] * m + k3[None, None, :]).ravel()


def forward_real(samples: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Coefficients of real samples via a real transform, expanded to the full lattice."""
    grid._check(samples)
    half = scipy.fft.rfftn(samples, axes=(-3, -2, -1), norm="forward")
    n, m = grid.n, grid.n // 2 + 1
    lead = samples.shape[:-3]
    out = np.empty(samples.shape, dtype=complex)
    out[..., :m] = half
    tail = half.reshape(lead + (-1,))[..., _hermitian_tail_index(n)]
    out[..., m:] = np.conj(tail).reshape(lead + (n, n, n - m))
    return out


def backward_real(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Real samples from Hermitian coefficients (the anti-Hermitian part is dropped)."""
    grid._check(coeffs)
    m = grid.n // 2 + 1
    return scipy.fft.irfftn(coeffs[..., :m], s=grid.shape, axes=(-3, -2, -1), norm="forward")


def transform(data: np.ndarray, grid: TorusGrid, direction: str = "forward") -> np.ndarray:
    if direction == "forward":
        return forward(data, grid)
    if direction == "backward":
        return backward(data, grid)
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


# -- multipliers --------------------------------------------------------------


def apply_multiplier(
    field: np.ndarray,
    symbol: Symbol | np.ndarray,
    grid: TorusGrid,
    zero_mode: str | complex = "symbol",
) -> np.ndarray:
    """Multiply coefficients by ``symbol(xi)``.

    ``symbol`` is either a callable of ``(xi1, xi2, xi3)`` or a precomputed
    array. Its value may be scalar per mode (shape ``(n,n,n)``) or a
    ``c x c`` matrix per mode (shape ``(c,c,n,n,n)``). ``zero_mode`` selects
    the zero-mode rule: ``"symbol"`` uses the symbol's own value, a number
    sets the zero-mode multiplier to that value.
    """
    grid._check(field)
    if callable(symbol):
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.asarray(symbol(*grid.xi))
    else:
        m = np.asarray(symbol)
    matrix = m.ndim == 5
    m = np.array(np.broadcast_to(m, m.shape[:-3] + grid.shape), dtype=complex)
    if zero_mode != "symbol":
        if matrix:
            m[..., 0, 0, 0] = zero_mode * np.eye(m.shape[0])
        else:
            m[..., 0, 0, 0] = zero_mode
    off = np.ones(grid.shape, bool)
    off[0, 0, 0] = False
    if not np.all(np.isfinite(m[..., off])):
        raise ValueError("symbol is not finite at a nonzero lattice point")
    if not np.all(np.isfinite(m[..., 0, 0, 0])):
        raise ValueError("symbol is not finite at the zero mode; pass a zero_mode value")
    if matrix:
        return np.einsum("ab...,b...->a...", m, field)
    return m * field


def abs_derivative(field: np.ndarray, grid: TorusGrid, s: float) -> np.ndarray:
    """Fractional derivative ``|D|^s``; the zero mode is sent to 0."""
    m = np.zeros(grid.shape)
    pos = grid.xi_sq > 0
    m[pos] = grid.xi_norm[pos] ** s
    return m * field


def laplacian(field: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return -grid.xi_sq * field


def heat_flow(field: np.ndarray, grid: TorusGrid, nu: float, t: float) -> np.ndarray:
    """Heat semigroup ``exp(nu t Delta)``."""
    return np.exp(-nu * t * grid.xi_sq) * field


def gradient(scalar: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.stack([1j * k * scalar for k in grid.xi])


def divergence(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """``i xi . (v1, v2, v3)`` of a 3- or 4-component field."""
    grid._check(u)
    if u.shape[0] not in (3, 4):
        raise ValueError("divergence needs a 3- or 4-component field")
    x1, x2, x3 = grid.xi
    return 1j * (x1 * u[0] + x2 * u[1] + x3 * u[2])


def leray_project(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Project the velocity part on divergence-free fields; ``theta`` unchanged."""
    grid._check(u)
    x1, x2, x3 = grid.xi
    dot = (x1 * u[0] + x2 * u[1] + x3 * u[2]) * grid.inv_xi_sq
    out = u.copy()
    out[0] -= x1 * dot
    out[1] -= x2 * dot
    out[2] -= x3 * dot
    return out


# -- reductions ---------------------------------------------------------------


def _weight(grid: TorusGrid, s: float) -> np.ndarray:
    if s == 0:
        w = np.ones(grid.shape)
        w[0, 0, 0] = 0.0
        return w
    w = np.zeros(grid.shape)
    pos = grid.xi_sq > 0
    w[pos] = grid.xi_sq[pos] ** s
    return w


def inner(a: np.ndarray, b: np.ndarray, grid: TorusGrid, s: float = 0.0, homogeneous: bool = True) -> complex:
    """Box inner product ``<a, b>`` in L^2 (``s=0``) or in H^s.

    The homogeneous version excludes the zero mode; the inhomogeneous one
    weights by ``(1+|xi|^2)^s``.
    """
    w = _weight(grid, s) if homogeneous else (1.0 + grid.xi_sq) ** s
    prod = np.conj(a) * b
    if prod.ndim == 4:
        prod = prod.sum(axis=0)
    return complex(grid.volume * np.sum(w * prod))


def l2_norm(u: np.ndarray, grid: TorusGrid) -> float:
    """Full L^2 norm including the mean."""
    return math.sqrt(grid.volume * float(np.sum(np.abs(u) ** 2)))


def hs_norm(u: np.ndarray, grid: TorusGrid, s: float, homogeneous: bool = True) -> float:
    """Sobolev norm: homogeneous ``dot H^s`` (zero mode excluded) or ``H^s``."""
    w = _weight(grid, s) if homogeneous else (1.0 + grid.xi_sq) ** s
    sq = np.abs(u) ** 2
    if sq.ndim == 4:
        sq = sq.sum(axis=0)
    return math.sqrt(grid.volume * float(np.sum(w * sq)))


# -- random fields ------------------------------------------------------------


def random_field(
    grid: TorusGrid,
    components: int = 1,
    rng: np.random.Generator | int | None = None,
    slope: float = 0.0,
    cutoff: float | None = None,
    mean_free: bool = True,
) -> np.ndarray:
    """Coefficients of a real random field with spectrum ``|xi|^-slope exp(-(|xi|/cutoff)^2)``."""
    rng = np.random.default_rng(rng)
    noise = rng.standard_normal((components,) + grid.shape)
    c = forward(noise, grid)
    shape = np.ones(grid.shape)
    pos = grid.xi_sq > 0
    shape[pos] = grid.xi_norm[pos] ** (-slope)
    if cutoff is not None:
        shape = shape * np.exp(-(grid.xi_sq / cutoff**2))
    c = c * shape
    # the Nyquist planes have no Hermitian partner on the lattice
    c[..., grid.n // 2, :, :] = 0.0
    c[..., :, grid.n // 2, :] = 0.0
    c[..., :, :, grid.n // 2] = 0.0
    if mean_free:
        c[..., 0, 0, 0] = 0.0
    return c if components > 1 else c[0]


def random_state(grid: TorusGrid, rng=None, **kwargs) -> np.ndarray:
    """Random divergence-free 4-component state."""
    return leray_project(random_field(grid, 4, rng, **kwargs), grid)


def check_state(u: np.ndarray, grid: TorusGrid, tol: float = 1e-12) -> None:
    """Raise if ``u`` is not a 4-component divergence-free field."""
    if u.shape != (4,) + grid.shape:
        raise ValueError(f"expected a state of shape {(4,) + grid.shape}, got {u.shape}")
    scale = float(np.max(np.abs(u[:3]) * grid.xi_norm)) or 1.0
    defect = float(np.max(np.abs(divergence(u, grid))))
    if defect > tol * scale:
        raise ValueError(f"velocity is not divergence-free (defect {defect:.3e})")


# -- binary snapshots -----------------------------------------------------------

_MAGIC = b"RLB1"
_HEADER = struct.Struct("<4sIId")


def write_snapshot(path: str | Path, coeffs: np.ndarray, grid: TorusGrid) -> None:
    """Write coefficients in the ``RLB1`` little-endian format."""
    grid._check(coeffs)
    arr = coeffs if coeffs.ndim == 4 else coeffs[None]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, arr.shape[0], grid.n, float(grid.box_length)))
        fh.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())


def read_snapshot(path: str | Path) -> tuple[np.ndarray, TorusGrid]:
    """Read an ``RLB1`` snapshot; scalar fields come back as ``(n, n, n)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, c, n, length = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = data[_HEADER.size:]
    expected = c * n**3 * 16
    if len(body) != expected:
        raise ValueError(f"snapshot body has {len(body)} bytes, expected {expected}")
    arr = np.frombuffer(body, dtype="<c16").reshape((c, n, n, n)).astype(complex)
    grid = TorusGrid(n, length)
    return (arr[0] if c == 1 else arr), grid
