"""Dispersive phase, its Hessian zones and whole-space oscillatory kernels.

The kernel ``K_j(sigma)(x) = int exp(i x.xi + i sigma b(xi)) phi1(2^-j |xi|) dxi``
is approximated by sampling the integrand on a uniform frequency grid of
spacing ``h`` and inverse transforming, which yields the kernel on a
periodic box of period ``2 pi / h``. Because every phase used here depends
on ``(|xi_h|, xi_3)`` only, the kernel is symmetric about the ``x_3`` axis
and its sup is attained on the ``x_2 = 0`` plane. That plane is obtained
exactly by summing over ``xi_2`` and doing a 2D transform in ``(xi_1, xi_3)``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.fft
import scipy.special

from .littlewood_paley import DyadicFilter, smooth_step
from .spectral import TorusGrid

__all__ = [
    "KernelWindowError",
    "PhaseSpec",
    "CutoffSpec",
    "FrequencySampling",
    "KernelSample",
    "DecayFit",
    "PIECES",
    "hessian_bF",
    "zone_classify",
    "kernel_snapshots",
    "kernel_snapshot",
    "decay_table",
    "decay_fit",
    "envelope_constant",
    "write_decay_csv",
    "fit_report",
    "strichartz_admissible",
    "lj_apply",
    "StrichartzReport",
    "free_solution_norms",
    "strichartz_measure",
]

PIECES = ("whole", "piece1", "piece2", "piece3")


class KernelWindowError(ValueError):
    """Kernel mass reaches the box boundary: sigma is too large for the sampling."""


@dataclasses.dataclass(frozen=True)
class PhaseSpec:
    """``primitive``: ``b_F = |xi|_F / (F |xi|)``; ``rotating``: ``b = xi_3 / |xi|``."""

    kind: str = "primitive"
    froude: float = 2.0

    def __post_init__(self):
        if self.kind not in ("primitive", "rotating"):
            raise ValueError(f"unknown phase kind {self.kind!r}")
        if self.kind == "primitive" and (self.froude <= 0 or self.froude == 1):
            raise ValueError("froude must be positive and different from 1")

    def value_cyl(self, rho, x3):
        """Phase as a function of ``|xi_h|`` and ``xi_3`` (0 at the origin)."""
        rho, x3 = np.broadcast_arrays(np.asarray(rho, float), np.asarray(x3, float))
        r = np.sqrt(rho**2 + x3**2)
        safe = np.where(r > 0, r, 1.0)
        if self.kind == "rotating":
            return np.where(r > 0, x3 / safe, 0.0)
        rf = np.sqrt(rho**2 + self.froude**2 * x3**2)
        return np.where(r > 0, rf / (self.froude * safe), 0.0)

    def __call__(self, xi1, xi2, xi3):
        return self.value_cyl(np.hypot(xi1, xi2), xi3)

    def gradient(self, xi: Sequence[float]) -> np.ndarray:
        x = np.asarray(xi, dtype=float)
        r = np.linalg.norm(x)
        if r == 0:
            raise ValueError("phase gradient is undefined at xi = 0")
        if self.kind == "rotating":
            return np.array([0.0, 0.0, 1.0]) / r - x[2] * x / r**3
        fr = self.froude
        d = np.array([1.0, 1.0, fr * fr])
        rf = math.sqrt(float(d @ (x * x)))
        return (d * x / (rf * r) - rf * x / r**3) / fr

    def hessian(self, xi: Sequence[float]) -> np.ndarray:
        if self.kind == "primitive":
            return hessian_bF(xi, self.froude)[0]
        x1, x2, x3 = (float(c) for c in xi)
        r2 = x1 * x1 + x2 * x2 + x3 * x3
        if r2 == 0:
            raise ValueError("phase Hessian is undefined at xi = 0")
        x = np.array([x1, x2, x3])
        e3 = np.array([0.0, 0.0, 1.0])
        r = math.sqrt(r2)
        return (
            -(np.outer(e3, x) + np.outer(x, e3)) / r**3
            - x3 * np.eye(3) / r**3
            + 3 * x3 * np.outer(x, x) / r**5
        )

    def hessian_eigenvalues(self, xi: Sequence[float]) -> np.ndarray:
        if self.kind == "primitive":
            return hessian_bF(xi, self.froude)[1]
        x1, x2, x3 = (float(c) for c in xi)
        r2 = x1 * x1 + x2 * x2 + x3 * x3
        if r2 == 0:
            raise ValueError("phase Hessian is undefined at xi = 0")
        root = math.sqrt(x3 * x3 + 4 * (x1 * x1 + x2 * x2))
        return np.array([-x3, 0.5 * (root - x3), -0.5 * (root + x3)]) / r2**1.5


def hessian_bF(xi: Sequence[float], froude: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form Hessian of ``b_F`` and its eigenvalue triple.

    Returns ``(matrix, eigenvalues)`` with eigenvalues ordered as
    ``(xi_3^2, (a + s)/2, (a - s)/2)`` times the common prefactor
    ``(1 - F^2) / (F |xi|^3 |xi|_F)``, where ``a = xi_3^2 - |xi_h|^2 |xi|^2/|xi|_F^2``
    and ``s = sqrt(a^2 + 4 xi_3^2 |xi_h|^2)``.
    """
    x1, x2, x3 = (float(c) for c in xi)
    fr = float(froude)
    h2 = x1 * x1 + x2 * x2
    r2 = h2 + x3 * x3
    if r2 == 0:
        raise ValueError("Hessian of b_F is undefined at xi = 0")
    rf2 = h2 + fr * fr * x3 * x3
    pref = (1 - fr * fr) / (fr * r2**1.5 * math.sqrt(rf2))
    a_f = 3 / r2 + 1 / rf2
    b_f = 3 / r2 + fr * fr / rf2
    q = x3 * x3
    m = np.array(
        [
            [q * (1 - x1 * x1 * a_f), -x1 * x2 * q * a_f, x1 * x3 * (2 - q * b_f)],
            [-x1 * x2 * q * a_f, q * (1 - x2 * x2 * a_f), x2 * x3 * (2 - q * b_f)],
            [x1 * x3 * (2 - q * b_f), x2 * x3 * (2 - q * b_f), -h2 * (1 - q * b_f)],
        ]
    )
    a = q - h2 * r2 / rf2
    s = math.sqrt(a * a + 4 * q * h2)
    eig = pref * np.array([q, 0.5 * (a + s), 0.5 * (a - s)])
    return pref * m, eig


def zone_classify(xi: Sequence[float], froude: float, tol: float = 1e-12) -> int:
    """Number of nonzero Hessian eigenvalues of ``b_F`` (closed form, relative zero test)."""
    eig = hessian_bF(xi, froude)[1]
    scale = float(np.max(np.abs(eig)))
    if scale == 0:
        return 0
    return int(np.sum(np.abs(eig) > tol * scale))


@dataclasses.dataclass(frozen=True)
class CutoffSpec:
    """Cutoff ``chi`` (1 on ``B(0,1)``, 0 outside ``B(0,4/3)``) and the scale ``k0``."""

    k0: float = 0.25

    def __post_init__(self):
        if not 0 < self.k0 < 3 / (8 * math.sqrt(2)):
            raise ValueError("k0 must satisfy 0 < k0 < 3/(8 sqrt 2)")

    @staticmethod
    def chi(t):
        return 1.0 - smooth_step((np.asarray(t, dtype=float) - 1.0) * 3.0)

    def weights(self, rho, x3) -> dict[str, np.ndarray]:
        c3 = self.chi(np.abs(x3) / self.k0)
        ch = self.chi(rho / self.k0)
        return {
            "piece1": c3 * (1 - ch),
            "piece2": ch * (1 - c3),
            "piece3": (1 - c3) * (1 - ch),
        }


@dataclasses.dataclass(frozen=True)
class FrequencySampling:
    """Uniform frequency grid of spacing ``h`` covering ``|xi_i| <= radius``, padded to ``npad``."""

    h: float = 1 / 64
    radius: float = 3.0
    npad: int = 512

    @property
    def half(self) -> int:
        return int(math.ceil(self.radius / self.h))

    @property
    def points(self) -> int:
        return 2 * self.half + 1

    @property
    def box_period(self) -> float:
        return 2 * math.pi / self.h

    def __post_init__(self):
        if self.npad < self.points:
            raise ValueError(f"npad={self.npad} is smaller than the {self.points} frequency samples")

    def axis(self, scale: float = 1.0) -> np.ndarray:
        return scale * self.h * np.arange(-self.half, self.half + 1)

    def positions(self, scale: float = 1.0) -> np.ndarray:
        """Spatial sample positions (FFT order) for a level with frequency scale ``scale``."""
        return np.fft.fftfreq(self.npad, d=1.0 / self.npad) * (self.box_period / scale / self.npad)


@dataclasses.dataclass(frozen=True)
class KernelSample:
    sigma: float
    piece: str
    values: np.ndarray
    box_period: float
    boundary_mass: float
    level: int = 0

    @property
    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _boundary_mass(values: np.ndarray, frac: float = 0.45) -> float:
    """Max of ``|K|`` over the outer band of the box relative to the global max."""
    mag = np.abs(values)
    n = mag.shape[0]
    idx = np.abs(np.fft.fftfreq(n, 1.0 / n))
    band = idx >= frac * n
    grids = np.meshgrid(*([band] * mag.ndim), indexing="ij")
    outer = np.logical_or.reduce(grids)
    peak = float(mag.max())
    return float(mag[outer].max()) / peak if peak > 0 else 0.0


def kernel_snapshots(
    sigma: float,
    pieces: Iterable[str] = PIECES,
    cutoffs: CutoffSpec = CutoffSpec(),
    sampling: FrequencySampling = FrequencySampling(),
    phase: PhaseSpec = PhaseSpec(),
    level: int = 0,
    plane: bool = True,
    boundary_tol: float | None = 1e-6,
) -> dict[str, KernelSample]:
    """Kernel samples for several pieces in one pass over the frequency grid.

    ``plane=True`` returns the ``x_2 = 0`` plane ``(npad, npad)``; ``plane=False``
    the full 3D box ``(npad, npad, npad)`` (small samplings only).
    """
    pieces = tuple(pieces)
    for p in pieces:
        if p not in PIECES:
            raise ValueError(f"unknown piece {p!r}")
    scale = 2.0**level
    ax = sampling.axis(scale)
    n, half, npad = sampling.points, sampling.half, sampling.npad
    cell = (scale * sampling.h) ** 3
    x1, x3 = np.meshgrid(ax, ax, indexing="ij")
    acc = {p: np.zeros((n, n) if plane else (n, n, n), dtype=complex) for p in pieces}
    for k, x2 in enumerate(ax):
        rho = np.sqrt(x1 * x1 + x2 * x2)
        r = np.sqrt(rho * rho + x3 * x3)
        w = DyadicFilter.phi1(r / scale)
        if not w.any():
            continue
        e = np.exp(1j * sigma * phase.value_cyl(rho, x3)) * w
        cuts = cutoffs.weights(rho, x3) if set(pieces) - {"whole"} else {}
        for p in pieces:
            term = e if p == "whole" else e * cuts[p]
            if plane:
                acc[p] += term
            else:
                acc[p][:, k, :] = term
    out = {}
    for p in pieces:
        shape = (npad,) * acc[p].ndim
        buf = np.zeros(shape, dtype=complex)
        buf[tuple(slice(0, n) for _ in shape)] = acc[p]
        buf = np.roll(buf, (-half,) * len(shape), axis=tuple(range(len(shape))))
        vals = scipy.fft.ifftn(buf, norm="forward") * cell
        bm = _boundary_mass(vals)
        if boundary_tol is not None and bm > boundary_tol:
            raise KernelWindowError(
                f"sigma={sigma}: boundary mass {bm:.2e} exceeds {boundary_tol:.0e}; refine h or lower sigma"
            )
        out[p] = KernelSample(float(sigma), p, vals, sampling.box_period / scale, bm, level)
    return out


def kernel_snapshot(sigma: float, piece: str = "whole", **kwargs) -> KernelSample:
    return kernel_snapshots(sigma, (piece,), **kwargs)[piece]


def decay_table(sigmas: Sequence[float], pieces: Iterable[str] = PIECES, **kwargs) -> list[KernelSample]:
    """Snapshots for every ``(sigma, piece)``; kernel values are dropped to save memory."""
    rows = []
    for s in sigmas:
        for p, smp in kernel_snapshots(s, pieces, **kwargs).items():
            rows.append(dataclasses.replace(smp, values=np.array([smp.sup_abs])))
    return rows


@dataclasses.dataclass(frozen=True)
class DecayFit:
    piece: str
    slope: float
    intercept: float
    residual: float
    sigmas: tuple[float, ...]
    sups: tuple[float, ...]


def _validate_window(sigmas: np.ndarray) -> None:
    if len(sigmas) < 6 or np.any(np.diff(sigmas) <= 0) or sigmas[0] <= 0:
        raise ValueError("need at least 6 increasing positive sigma values")
    if sigmas[-1] / sigmas[0] < 100 * (1 - 1e-12):
        raise ValueError("sigma values must span at least two decades")


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares slope, intercept and rms residual of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    a = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(a, ly, rcond=None)
    res = float(np.sqrt(np.mean((a @ [slope, intercept] - ly) ** 2)))
    return float(slope), float(intercept), res


def decay_fit(
    sigmas: Sequence[float],
    piece: str = "whole",
    sups: Sequence[float] | None = None,
    **kwargs,
) -> DecayFit:
    """Fit ``log sup|K_{0,piece}(sigma)|`` against ``log sigma``.

    ``sups`` may be passed to reuse already measured values.
    """
    sig = np.asarray(sigmas, dtype=float)
    _validate_window(sig)
    if sups is None:
        sups = [kernel_snapshot(s, piece, **kwargs).sup_abs for s in sig]
    slope, intercept, res = fit_loglog(sig, sups)
    return DecayFit(piece, slope, intercept, res, tuple(sig), tuple(float(v) for v in sups))


def envelope_constant(sigmas: Sequence[float], sups: Sequence[float]) -> float:
    """Smallest ``C`` with ``sup <= C min(1, sigma^{-1/2})`` on the samples."""
    sig = np.asarray(sigmas, float)
    return float(np.max(np.asarray(sups, float) / np.minimum(1.0, np.abs(sig) ** -0.5)))


def write_decay_csv(path: str | Path, rows: Sequence[KernelSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "piece", "sup_abs", "box_period", "boundary_mass"])
        for r in rows:
            w.writerow([repr(r.sigma), r.piece, repr(r.sup_abs), repr(r.box_period), repr(r.boundary_mass)])


def fit_report(fit: DecayFit, admissibility: dict | None = None) -> dict:
    return {
        "piece": fit.piece,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
        "sigmas": list(fit.sigmas),
        "sup_abs": list(fit.sups),
        "admissibility": admissibility or {},
    }


# -- operators and Strichartz scaling ---------------------------------------------


def strichartz_admissible(p: float, r: float, theta: float) -> tuple[bool, str]:
    """Check ``r >= 2``, ``theta in [0, 1]``, ``1 <= p <= 4 / (theta (1 - 2/r))``."""
    if r < 2:
        return False, "r >= 2"
    if not 0 <= theta <= 1:
        return False, "theta in [0, 1]"
    denom = theta * (1 - 2 / r)
    pmax = math.inf if denom == 0 else 4 / denom
    if not 1 <= p <= pmax * (1 + 1e-12):
        return False, f"p in [1, 4/(theta(1-2/r))] = [1, {pmax:g}]"
    return True, "admissible"


def lj_apply(sigma: float, j: int, g: np.ndarray, grid: TorusGrid, phase: PhaseSpec = PhaseSpec()) -> np.ndarray:
    """``L_j(sigma) g``: multiplier ``exp(i sigma b(xi)) phi1(2^-j |xi|)``."""
    m = np.exp(1j * sigma * phase(*grid.xi)) * DyadicFilter.phi1(grid.xi_norm / 2.0**j)
    return m * g


Profile = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _default_profile(rho, x3):
    return DyadicFilter.phi1(np.sqrt(rho**2 + x3**2))


@dataclasses.dataclass(frozen=True)
class StrichartzReport:
    p: float
    r: float
    theta: float
    epsilons: tuple[float, ...]
    norms: tuple[float, ...]
    slope: float
    intercept: float
    residual: float
    predicted: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class _CylinderTransform:
    """Inverse Fourier transform of cylindrically symmetric spectra on the ``x_2 = 0`` plane.

    The radial part uses a Bessel ``J0`` quadrature in ``|xi_h|``, the vertical
    part an FFT in ``xi_3``.
    """

    def __init__(self, h: float, radius: float, x_max: float, dx: float, npad3: int):
        self.h = h
        m = int(math.ceil(radius / h))
        self.rho = h * np.arange(0, m + 1)
        self.k3 = h * np.arange(-m, m + 1)
        self.m = m
        self.xr = np.arange(0.0, x_max + dx / 2, dx)
        self.npad3 = npad3
        if npad3 < 2 * m + 1:
            raise ValueError("npad3 too small")
        # trapezoid weights in rho, times 2 pi rho
        wr = np.full(self.rho.shape, h)
        wr[0] = wr[-1] = h / 2
        self.jmat = scipy.special.j0(np.outer(self.xr, self.rho)) * (2 * np.pi * self.rho * wr)
        x3 = np.fft.fftfreq(npad3, d=1.0 / npad3) * (2 * np.pi / h / npad3)
        keep = np.abs(x3) <= x_max
        self.keep = keep
        self.x3 = x3[keep]
        self.dx3 = 2 * np.pi / h / npad3

    def __call__(self, spec: np.ndarray) -> np.ndarray:
        """``spec`` has shape ``(len(rho), len(k3))``; returns ``(len(xr), len(x3))``."""
        radial = self.jmat @ spec
        buf = np.zeros((radial.shape[0], self.npad3), dtype=complex)
        buf[:, : 2 * self.m + 1] = radial
        buf = np.roll(buf, -self.m, axis=1)
        vals = scipy.fft.ifft(buf, axis=1, norm="forward") * self.h
        return vals[:, self.keep]

    def lr_norm(self, vals: np.ndarray, r: float) -> float:
        mag = np.abs(vals)
        if math.isinf(r):
            return float(mag.max())
        # x3 is periodic and in FFT order: plain rectangle rule
        radial = np.sum(mag**r, axis=1) * self.dx3
        dx = self.xr[1] - self.xr[0]
        # 2 pi x g(x) has slope 2 pi g(0) at the axis: first Euler-Maclaurin correction
        total = np.trapezoid(radial * 2 * np.pi * self.xr, self.xr) + dx * dx / 12 * 2 * np.pi * radial[0]
        return float(total ** (1 / r))


def free_solution_plane(
    epsilon: float,
    t: float,
    nu: float,
    phase: PhaseSpec = PhaseSpec(),
    profile: Profile = _default_profile,
    h: float = 1 / 64,
    x_max: float = 180.0,
    dx: float = 0.25,
    npad3: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Free solution at time ``t`` on the half plane ``x_2 = 0, x_1 >= 0``.

    Returns ``(x_r, x_3, values)`` with ``values[i, k]`` at ``(x_r[i], 0, x_3[k])``.
    """
    if npad3 is None:
        npad3 = int(2 ** math.ceil(math.log2(2 * math.pi / (h * dx))))
    tr = _CylinderTransform(h, 3.0, x_max, dx, npad3)
    rho, k3 = np.meshgrid(tr.rho, tr.k3, indexing="ij")
    spec = np.exp(-nu * t * (rho**2 + k3**2) + 1j * (t / epsilon) * phase.value_cyl(rho, k3)) * profile(rho, k3)
    return tr.xr, tr.x3, tr(spec)


def free_solution_norms(
    epsilon: float,
    times: np.ndarray,
    r: float,
    nu: float,
    phase: PhaseSpec = PhaseSpec(),
    profile: Profile = _default_profile,
    h: float = 1 / 64,
    x_max: float = 180.0,
    dx: float = 0.25,
    npad3: int | None = None,
) -> np.ndarray:
    """``||f(t)||_{L^r}`` for ``f(t) = exp(-nu t |xi|^2 + i (t/eps) b(xi)) profile(xi)``."""
    radius = 3.0
    if npad3 is None:
        npad3 = int(2 ** math.ceil(math.log2(2 * math.pi / (h * dx))))
    tr = _CylinderTransform(h, radius, x_max, dx, npad3)
    rho, k3 = np.meshgrid(tr.rho, tr.k3, indexing="ij")
    b = phase.value_cyl(rho, k3)
    sq = rho**2 + k3**2
    prof = profile(rho, k3)
    out = []
    for t in times:
        spec = np.exp(-nu * t * sq + 1j * (t / epsilon) * b) * prof
        out.append(tr.lr_norm(tr(spec), r))
    return np.array(out)


def _max_group_speed(phase: PhaseSpec, profile: Profile, step: float = 1 / 256) -> float:
    """Largest ``|grad b|`` over the support of ``profile`` (finite differences)."""
    ax = np.arange(-3.0, 3.0 + step / 2, step)
    rho, k3 = np.meshgrid(ax[ax >= 0], ax, indexing="ij")
    b = phase.value_cyl(rho, k3)
    g1, g3 = np.gradient(b, step, step)
    support = profile(rho, k3) > 0
    support[:2] = False
    return float(np.max(np.hypot(g1, g3)[support]))


def strichartz_measure(
    p: float,
    r: float,
    theta: float,
    epsilons: Sequence[float],
    nu: float = 0.1,
    phase: PhaseSpec = PhaseSpec(),
    profile: Profile = _default_profile,
    t_end: float = 2.0,
    n_times: int = 81,
    h: float = 1 / 64,
    x_max: float = 180.0,
    dx: float = 0.25,
) -> StrichartzReport:
    """``||f||_{L^p(0,T; L^r)}`` of the free flow for each ``epsilon`` and its log-log slope.

    The time integral uses a trapezoid rule on ``n_times`` points uniform in
    ``t``. The spatial box must contain the dispersed wave packet; the
    largest group velocity is bounded by ``max|grad b| / epsilon`` and is
    checked against ``x_max``.
    """
    ok, why = strichartz_admissible(p, r, theta)
    if not ok:
        raise ValueError(f"inadmissible exponents: {why}")
    eps = np.asarray(epsilons, dtype=float)
    if len(eps) < 2:
        raise ValueError("need at least two epsilon values")
    speed = _max_group_speed(phase, profile)
    if speed * t_end / eps.min() + 10 > x_max:
        raise ValueError("epsilon window too small for the spatial box; raise x_max or t_end")
    if x_max > 0.45 * 2 * math.pi / h:
        raise ValueError("x_max exceeds the periodisation-free part of the box")
    times = np.linspace(0.0, t_end, n_times)
    norms = []
    for e in eps:
        lr = free_solution_norms(e, times, r, nu, phase, profile, h, x_max, dx)
        norms.append(float(np.max(lr)) if math.isinf(p) else float(np.trapezoid(lr**p, times) ** (1 / p)))
    slope, intercept, res = fit_loglog(eps, norms)
    predicted = theta / 4 * (1 - 2 / r)
    return StrichartzReport(p, r, theta, tuple(eps), tuple(norms), slope, intercept, res, predicted)
