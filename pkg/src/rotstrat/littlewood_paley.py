"""Dyadic decomposition, Besov-type norms and the fractional Leibniz remainder."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .spectral import TorusGrid, abs_derivative, backward, forward, hs_norm

__all__ = [
    "smooth_step",
    "DyadicFilter",
    "BesovIndex",
    "dyadic_block",
    "lp_norm",
    "besov_norm",
    "block_norms",
    "chemin_lerner_norm",
    "time_besov_norm",
    "energy_norm_Es",
    "interpolation_check",
    "bilinear_remainder_Ms",
    "norm_record",
    "write_norm_records",
]


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``, built from ``exp(-1/t)``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclasses.dataclass(frozen=True)
class DyadicFilter:
    """Radial Littlewood-Paley profile.

    ``chi`` equals 1 for ``r <= inner`` and 0 for ``r >= outer``; the block
    profile is ``phi(r) = chi(r/2) - chi(r)``, so the dyadic sum telescopes
    to 1 exactly. ``phi1`` equals 1 on ``[3/4, 8/3]`` and vanishes outside
    ``[1/2, 3]``.
    """

    inner: float = 0.96
    outer: float = 1.04

    def __post_init__(self):
        if not 0.75 <= self.inner < self.outer <= 4 / 3:
            raise ValueError("chi transition must lie inside [3/4, 4/3]")

    def chi(self, r):
        return 1.0 - smooth_step((np.asarray(r, dtype=float) - self.inner) / (self.outer - self.inner))

    def phi(self, r):
        return self.chi(np.asarray(r) / 2) - self.chi(r)

    @staticmethod
    def phi1(r):
        r = np.asarray(r, dtype=float)
        return smooth_step((r - 0.5) / 0.25) * (1.0 - smooth_step((r - 8 / 3) / (3 - 8 / 3)))

    def j_range(self, grid: TorusGrid) -> tuple[int, int]:
        """Blocks meeting the nonzero lattice; together they sum to 1 there."""
        rmin = grid.spacing
        rmax = float(grid.xi_norm.max())
        jmin = math.floor(math.log2(rmin / self.outer))
        jmax = math.ceil(math.log2(rmax / self.inner)) - 1
        return jmin, jmax


@dataclasses.dataclass(frozen=True)
class BesovIndex:
    s: float
    p_space: float = 2.0
    q_sum: float = 2.0

    def __post_init__(self):
        for v in (self.p_space, self.q_sum):
            if not 1 <= v <= math.inf:
                raise ValueError("integrability indices must lie in [1, inf]")


_DEFAULT_FILTER = DyadicFilter()


def dyadic_block(u: np.ndarray, j: int, grid: TorusGrid, filt: DyadicFilter = _DEFAULT_FILTER) -> np.ndarray:
    """Block ``Delta_j u`` with multiplier ``phi(2^-j xi)``."""
    jmin, jmax = filt.j_range(grid)
    if not jmin <= j <= jmax:
        raise ValueError(f"block {j} outside resolvable range [{jmin}, {jmax}]")
    return filt.phi(grid.xi_norm / 2.0**j) * u


def lp_norm(coeffs: np.ndarray, grid: TorusGrid, p: float) -> float:
    """L^p norm over the box from physical samples (Euclidean norm across components)."""
    vals = backward(coeffs, grid)
    mag = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0)) if vals.ndim == 4 else np.abs(vals)
    if math.isinf(p):
        return float(mag.max())
    cell = (grid.box_length / grid.n) ** 3
    return float((cell * np.sum(mag**p)) ** (1.0 / p))


def _lq(values: np.ndarray, q: float) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    if math.isinf(q):
        return float(values.max())
    return float(np.sum(values**q) ** (1.0 / q))


def block_norms(u, idx: BesovIndex, grid: TorusGrid, filt: DyadicFilter = _DEFAULT_FILTER) -> dict[int, float]:
    """Weighted block norms ``2^{js} ||Delta_j u||_{L^p}`` for every resolvable ``j``."""
    jmin, jmax = filt.j_range(grid)
    return {j: 2.0 ** (j * idx.s) * lp_norm(dyadic_block(u, j, grid, filt), grid, idx.p_space) for j in range(jmin, jmax + 1)}


def besov_norm(u: np.ndarray, idx: BesovIndex, grid: TorusGrid, filt: DyadicFilter = _DEFAULT_FILTER) -> float:
    """Homogeneous Besov norm ``|| (2^{js} ||Delta_j u||_{L^p})_j ||_{l^q}``."""
    jmin, jmax = filt.j_range(grid)
    if jmax < jmin:
        raise ValueError("empty resolvable block range")
    return _lq(list(block_norms(u, idx, grid, filt).values()), idx.q_sum)


def _time_norm(values: np.ndarray, times: np.ndarray, a: float) -> float:
    """Trapezoid on ``|.|^a`` then the a-th root; ``a = inf`` takes the max."""
    values = np.asarray(values, dtype=float)
    if math.isinf(a):
        return float(values.max())
    if len(values) < 2:
        raise ValueError("at least two time samples are needed for a finite time exponent")
    return float(np.trapezoid(values**a, times) ** (1.0 / a))


def _check_uniform(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if len(times) > 2:
        d = np.diff(times)
        if np.max(np.abs(d - d.mean())) > 1e-9 * max(abs(d.mean()), 1e-300):
            raise ValueError("time grid must be uniform")
    return times


def chemin_lerner_norm(
    samples: Sequence[np.ndarray],
    times: Sequence[float],
    a: float,
    idx: BesovIndex,
    grid: TorusGrid,
    filt: DyadicFilter = _DEFAULT_FILTER,
) -> float:
    """Time norm taken per block before the weighted ``l^q`` sum."""
    times = _check_uniform(times)
    if not math.isinf(a) and len(times) < 2:
        raise ValueError("at least two time samples are needed for a finite time exponent")
    per_time = [block_norms(u, idx, grid, filt) for u in samples]
    js = list(per_time[0])
    return _lq([_time_norm([bn[j] for bn in per_time], times, a) for j in js], idx.q_sum)


def time_besov_norm(
    samples: Sequence[np.ndarray],
    times: Sequence[float],
    a: float,
    idx: BesovIndex,
    grid: TorusGrid,
    filt: DyadicFilter = _DEFAULT_FILTER,
) -> float:
    """Plain ``L^a_t B^s_{p,q}`` norm: Besov norm per time, then the time norm."""
    times = _check_uniform(times)
    return _time_norm([besov_norm(u, idx, grid, filt) for u in samples], times, a)


def energy_norm_Es(
    samples: Sequence[np.ndarray],
    times: Sequence[float],
    s: float,
    nu: float,
    grid: TorusGrid,
    squared: bool = True,
) -> float:
    """``sup_t ||f||^2_{H^s} + nu int ||f||^2_{H^{s+1}} dt`` (its square root if ``squared=False``)."""
    times = _check_uniform(times)
    hs = np.array([hs_norm(u, grid, s) ** 2 for u in samples])
    total = float(hs.max()) if len(hs) else 0.0
    if len(times) > 1:
        hs1 = np.array([hs_norm(u, grid, s + 1) ** 2 for u in samples])
        total += nu * float(np.trapezoid(hs1, times))
    return total if squared else math.sqrt(total)


def interpolation_check(
    u: np.ndarray,
    s: float,
    alpha: float,
    beta: float,
    grid: TorusGrid,
    filt: DyadicFilter = _DEFAULT_FILTER,
) -> float:
    """Ratio ``||u||_{B^s_{2,1}} / (||u||_{H^{s-alpha}}^{b/(a+b)} ||u||_{H^{s+beta}}^{a/(a+b)})``."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    lo = hs_norm(u, grid, s - alpha)
    hi = hs_norm(u, grid, s + beta)
    rhs = lo ** (beta / (alpha + beta)) * hi ** (alpha / (alpha + beta))
    if rhs == 0:
        raise ValueError("right-hand side vanishes")
    return besov_norm(u, BesovIndex(s, 2, 1), grid, filt) / rhs


def bilinear_remainder_Ms(
    f: np.ndarray,
    g: np.ndarray,
    s: float,
    grid: TorusGrid,
    dealias: float = 2 / 3,
) -> np.ndarray:
    """Defect ``|D|^s(fg) - (|D|^s f) g - f |D|^s g`` with dealiased products."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    mask = grid.dealias_mask(dealias)
    f = f * mask
    g = g * mask
    fx, gx = backward(f, grid), backward(g, grid)
    dfx = backward(abs_derivative(f, grid, s), grid)
    dgx = backward(abs_derivative(g, grid, s), grid)
    fg = forward(fx * gx, grid) * mask
    rest = forward(dfx * gx + fx * dgx, grid) * mask
    return abs_derivative(fg, grid, s) - rest


def norm_record(norm_name: str, indices: dict, value: float) -> dict:
    return {"norm_name": norm_name, "indices": dict(indices), "value": float(value)}


def write_norm_records(path: str | Path, records: Sequence[dict]) -> None:
    Path(path).write_text(json.dumps(list(records), indent=2))
