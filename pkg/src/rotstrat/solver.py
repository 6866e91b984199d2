"""Pseudo-spectral integration of the primitive, quasi-geostrophic and oscillation systems.

Time stepping is by integrating factors: the exact linear flow (eigen-mode
exponentials for the primitive system, the ``Gamma`` heat factor for the
quasi-geostrophic system) carries the state, and only the dealiased
quadratic term is stepped with a Runge-Kutta scheme (Lawson form). The
``1/epsilon`` skew term therefore never limits the step.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .linear import ForcingSamples, LinearPropagator, apply_linear
from .qg import gamma_multiplier, p_project, potential_vorticity, q_project, q_reconstruct
from .spectral import (
    PhysicalParams,
    TorusGrid,
    backward,
    backward_real,
    forward,
    forward_real,
    hs_norm,
    l2_norm,
    leray_project,
    write_snapshot,
)

__all__ = [
    "SolverError",
    "NumericalInstabilityError",
    "BlowupError",
    "SolverConfig",
    "Trajectory",
    "Advection",
    "nonlinear_term",
    "nonlinear_term_convolution",
    "step_pe",
    "solve_pe",
    "solve_qg",
    "solve_qg_velocity",
    "compute_gb",
    "gb_samples",
    "solve_we",
    "compute_delta",
    "assemble_forcings",
    "residual_check",
    "blowup_monitor",
    "CoupledRun",
    "run_coupled",
    "write_trajectory",
]


class SolverError(RuntimeError):
    """Base class for integration failures."""


class NumericalInstabilityError(SolverError):
    """Non-finite values appeared in the state."""


class BlowupError(SolverError):
    """The blow-up monitor exceeded its configured ceiling."""


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    dealias: float = 2 / 3
    integrator: str = "IF-RK4"
    sample_every: int = 1
    nonlinear: bool = True
    blowup_ceiling: float | None = None
    store_states: bool = True
    norm_indices: tuple[float, ...] = (0.5, 1.5)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if not 0.5 < self.dealias < 1:
            raise ValueError("dealias must lie in (1/2, 1)")
        if self.integrator not in ("IF-RK2", "IF-RK4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be a positive integer")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_end must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def sample_times(self) -> np.ndarray:
        steps = list(range(0, self.n_steps + 1, self.sample_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.array(steps) * self.dt


@dataclasses.dataclass
class Trajectory:
    """Samples of a solution; ``states`` may be ``None`` when only norms are kept."""

    times: np.ndarray
    states: np.ndarray | None
    norms: dict[str, np.ndarray]
    grid: TorusGrid

    def state(self, k: int) -> np.ndarray:
        if self.states is None:
            raise ValueError("trajectory was recorded without states")
        return self.states[k]

    def check_divergence_free(self, tol: float = 1e-10) -> float:
        """Largest relative divergence over the samples; raises above ``tol``."""
        from .spectral import divergence

        worst = 0.0
        for u in self.states:
            scale = float(np.max(np.abs(u[:3]) * self.grid.xi_norm)) or 1.0
            worst = max(worst, float(np.max(np.abs(divergence(u, self.grid)))) / scale)
        if worst > tol:
            raise ValueError(f"state not divergence-free (relative defect {worst:.2e})")
        return worst


def _norm_key(s: float) -> str:
    return "L2" if s == 0 else f"H{s:g}"


class _Recorder:
    def __init__(self, grid: TorusGrid, cfg: SolverConfig, scalar: bool = False):
        self.grid = grid
        self.cfg = cfg
        self.times: list[float] = []
        self.states: list[np.ndarray] = []
        self.norms: dict[str, list[float]] = {_norm_key(0): []}
        for s in cfg.norm_indices:
            self.norms[_norm_key(s)] = []

    def __call__(self, t: float, u: np.ndarray) -> None:
        self.times.append(t)
        if self.cfg.store_states:
            self.states.append(u.copy())
        self.norms["L2"].append(l2_norm(u, self.grid))
        for s in self.cfg.norm_indices:
            self.norms[_norm_key(s)].append(hs_norm(u, self.grid, s))

    def finish(self) -> Trajectory:
        states = np.array(self.states) if self.cfg.store_states else None
        return Trajectory(np.array(self.times), states, {k: np.array(v) for k, v in self.norms.items()}, self.grid)


# -- nonlinear terms --------------------------------------------------------------


class Advection:
    """Dealiased transport terms on a fixed grid."""

    def __init__(self, grid: TorusGrid, dealias: float = 2 / 3):
        self.grid = grid
        self.mask = grid.dealias_mask(dealias)

    def divergence_form(self, u: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
        """Masked ``div(u (x) w) = u.grad w`` for divergence-free ``u`` (no projection).

        With ``w=None`` the symmetric products of ``u`` with itself are reused.
        """
        grid, mask = self.grid, self.mask
        x = grid.xi
        up = backward_real(u[:3] * mask, grid)
        out = np.zeros((4,) + grid.shape, dtype=complex)
        if w is None:
            th = backward_real(u[3] * mask, grid)
            pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            prod = np.empty((9,) + grid.shape)
            for k, (i, j) in enumerate(pairs):
                prod[k] = up[i] * up[j]
            for i in range(3):
                prod[6 + i] = up[i] * th
            ph = forward_real(prod, grid)
            sym = {}
            for k, (i, j) in enumerate(pairs):
                sym[(i, j)] = sym[(j, i)] = ph[k]
            for a in range(3):
                out[a] = 1j * (x[0] * sym[(0, a)] + x[1] * sym[(1, a)] + x[2] * sym[(2, a)])
            out[3] = 1j * (x[0] * ph[6] + x[1] * ph[7] + x[2] * ph[8])
        else:
            wp = backward_real(w * mask, grid)
            prod = np.einsum("i...,a...->ia...", up, wp).reshape((12,) + grid.shape)
            ph = forward_real(prod, grid).reshape((3, 4) + grid.shape)
            for a in range(4):
                out[a] = 1j * (x[0] * ph[0, a] + x[1] * ph[1, a] + x[2] * ph[2, a])
        return out * mask

    def advective_form(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Masked ``sum_i u_i d_i w`` from products of velocities with gradients."""
        grid, mask = self.grid, self.mask
        up = backward_real(u[:3] * mask, grid)
        wm = w * mask
        acc = np.zeros((w.shape[0],) + grid.shape)
        for i, k in enumerate(grid.xi):
            acc += up[i] * backward_real(1j * k * wm, grid)
        return forward_real(acc, grid) * mask

    def pe_term(self, u: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
        """``-P(u.grad w)`` (``w`` defaults to ``u``)."""
        return -leray_project(self.divergence_form(u, w), self.grid)

    def qg_term(self, omega: np.ndarray, params: PhysicalParams) -> np.ndarray:
        """``-v.grad omega`` for the velocity reconstructed from ``omega``."""
        grid, mask = self.grid, self.mask
        om = omega * mask
        v = q_reconstruct(om, grid, params)
        f = backward_real(np.stack([v[0], v[1], om]), grid)
        ph = forward_real(np.stack([f[0] * f[2], f[1] * f[2]]), grid)
        x = grid.xi
        return -1j * (x[0] * ph[0] + x[1] * ph[1]) * mask


def nonlinear_term(u: np.ndarray, w: np.ndarray, grid: TorusGrid, dealias: float = 2 / 3) -> np.ndarray:
    """``-P(u.grad w)``: velocity-gradient products in physical space, 2/3 dealiased, Leray-projected."""
    adv = Advection(grid, dealias)
    return -leray_project(adv.advective_form(u, w), grid)


def nonlinear_term_convolution(u: np.ndarray, w: np.ndarray, grid: TorusGrid, dealias: float = 2 / 3) -> np.ndarray:
    """Reference ``-P(u.grad w)`` by explicit triad sums over ``p + q = k`` (slow; small grids only)."""
    n = grid.n
    mask = grid.dealias_mask(dealias)
    idx = grid.index
    k = grid.spacing * idx
    uu = u * mask
    ww = w * mask
    grad = np.stack([1j * k[:, None, None] * ww, 1j * k[None, :, None] * ww, 1j * k[None, None, :] * ww])
    out = np.zeros(w.shape, dtype=complex)
    for p in np.argwhere(mask):
        # q runs over the whole lattice; drop sums p + q that leave the fundamental range
        shifted = np.roll(grad, shift=tuple(p), axis=(2, 3, 4))
        keep = np.ones(grid.shape, dtype=bool)
        for axis in range(3):
            kk = idx + idx[p[axis]]
            valid = (kk >= -(n // 2)) & (kk < n // 2)
            keep &= np.roll(valid, idx[p[axis]]).reshape([-1 if a == axis else 1 for a in range(3)])
        a = uu[(slice(0, 3),) + tuple(p)]
        out += np.einsum("i,ia...->a...", a, shifted) * keep
    return -leray_project(out * mask, grid)


# -- time stepping ------------------------------------------------------------------


def _lawson(u, h, flow, nonlin, scheme):
    """One Lawson (integrating-factor) Runge-Kutta step.

    ``flow(v, tau)`` applies the exact linear flow over ``tau``.
    """
    if scheme == "IF-RK2":
        k1 = nonlin(u)
        k2 = nonlin(flow(u + h * k1, h))
        return flow(u + 0.5 * h * k1, h) + 0.5 * h * k2
    k1 = nonlin(u)
    k2 = nonlin(flow(u + 0.5 * h * k1, 0.5 * h))
    eu_half = flow(u, 0.5 * h)
    k3 = nonlin(eu_half + 0.5 * h * k2)
    eu = flow(eu_half, 0.5 * h)
    k4 = nonlin(eu + h * flow(k3, 0.5 * h))
    return eu + (h / 6) * (flow(k1, h) + 2 * flow(k2 + k3, 0.5 * h) + k4)


def _check_finite(u: np.ndarray, t: float, what: str) -> None:
    if not np.all(np.isfinite(u)):
        raise NumericalInstabilityError(f"{what}: non-finite values at t={t:.6g}; reduce dt")


class _PEStepper:
    def __init__(self, grid: TorusGrid, params: PhysicalParams, cfg: SolverConfig):
        params.require_equal_viscosities()
        self.grid, self.params, self.cfg = grid, params, cfg
        self.prop = LinearPropagator(grid, params)
        self.adv = Advection(grid, cfg.dealias)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        h = self.cfg.dt
        if not self.cfg.nonlinear:
            return self.prop.apply(u, h)
        return _lawson(u, h, self.prop.apply, self.adv.pe_term, self.cfg.integrator)


class _BlowupGuard:
    """Running trapezoid of ``||U||^2_{H^{3/2}}`` with an optional abort ceiling."""

    def __init__(self, grid: TorusGrid, ceiling: float | None):
        self.grid, self.ceiling = grid, ceiling
        self.total = 0.0
        self.last: float | None = None

    def update(self, u: np.ndarray, t: float, dt: float) -> None:
        rate = hs_norm(u, self.grid, 1.5) ** 2
        if self.last is not None:
            self.total += 0.5 * dt * (rate + self.last)
        self.last = rate
        if not math.isfinite(rate):
            raise NumericalInstabilityError(f"non-finite H^(3/2) norm at t={t:.6g}")
        if self.ceiling is not None and self.total > self.ceiling:
            raise BlowupError(
                f"blow-up monitor {self.total:.3e} exceeded ceiling {self.ceiling:.3e} at t={t:.6g}; reduce dt"
            )


def step_pe(u: np.ndarray, grid: TorusGrid, params: PhysicalParams, cfg: SolverConfig) -> np.ndarray:
    """One integrating-factor step of the primitive system (builds the propagator each call)."""
    out = _PEStepper(grid, params, cfg)(u)
    _check_finite(out, cfg.dt, "step_pe")
    return out


def solve_pe(u0: np.ndarray, grid: TorusGrid, params: PhysicalParams, cfg: SolverConfig) -> Trajectory:
    stepper = _PEStepper(grid, params, cfg)
    rec = _Recorder(grid, cfg)
    guard = _BlowupGuard(grid, cfg.blowup_ceiling)
    u = u0.copy()
    rec(0.0, u)
    guard.update(u, 0.0, cfg.dt)
    for k in range(1, cfg.n_steps + 1):
        u = stepper(u)
        t = k * cfg.dt
        _check_finite(u, t, "primitive system")
        guard.update(u, t, cfg.dt)
        if k % cfg.sample_every == 0 or k == cfg.n_steps:
            rec(t, u)
    return rec.finish()


class _QGStepper:
    def __init__(self, grid: TorusGrid, params: PhysicalParams, cfg: SolverConfig):
        self.grid, self.params, self.cfg = grid, params, cfg
        self.gamma = gamma_multiplier(params)(*grid.xi)
        self.adv = Advection(grid, cfg.dealias)
        self._cache: dict[float, np.ndarray] = {}

    def flow(self, v: np.ndarray, tau: float) -> np.ndarray:
        if tau not in self._cache:
            self._cache[tau] = np.exp(self.gamma * tau)
        return self._cache[tau] * v

    def __call__(self, omega: np.ndarray) -> np.ndarray:
        h = self.cfg.dt
        if not self.cfg.nonlinear:
            return self.flow(omega, h)
        return _lawson(omega, h, self.flow, lambda w: self.adv.qg_term(w, self.params), self.cfg.integrator)


def solve_qg(omega0: np.ndarray, grid: TorusGrid, params: PhysicalParams, cfg: SolverConfig) -> Trajectory:
    """Evolve potential vorticity; the recorded states are the reconstructed ``U_QG``."""
    stepper = _QGStepper(grid, params, cfg)
    rec = _Recorder(grid, cfg)
    om = omega0.copy()
    om[0, 0, 0] = 0.0
    rec(0.0, q_reconstruct(om, grid, params))
    for k in range(1, cfg.n_steps + 1):
        om = stepper(om)
        t = k * cfg.dt
        _check_finite(om, t, "quasi-geostrophic system")
        if k % cfg.sample_every == 0 or k == cfg.n_steps:
            rec(t, q_reconstruct(om, grid, params))
    return rec.finish()


def solve_qg_velocity(u0: np.ndarray, grid: TorusGrid, params: PhysicalParams, cfg: SolverConfig) -> Trajectory:
    """Velocity form ``d_t U + Q(v.grad U) - Gamma U = 0`` (cross-check of :func:`solve_qg`)."""
    gamma = gamma_multiplier(params)(*grid.xi)
    adv = Advection(grid, cfg.dealias)
    cache: dict[float, np.ndarray] = {}

    def flow(v, tau):
        if tau not in cache:
            cache[tau] = np.exp(gamma * tau)
        return cache[tau] * v

    def nonlin(u):
        return -q_project(adv.divergence_form(u, u), grid, params)

    rec = _Recorder(grid, cfg)
    u = u0.copy()
    rec(0.0, u)
    for k in range(1, cfg.n_steps + 1):
        u = _lawson(u, cfg.dt, flow, nonlin, cfg.integrator) if cfg.nonlinear else flow(u, cfg.dt)
        t = k * cfg.dt
        _check_finite(u, t, "quasi-geostrophic velocity system")
        if k % cfg.sample_every == 0 or k == cfg.n_steps:
            rec(t, u)
    return rec.finish()


def compute_gb(uqg: np.ndarray, grid: TorusGrid, params: PhysicalParams, dealias: float = 2 / 3) -> np.ndarray:
    """``G^b = P Pcal(U_QG . grad U_QG)``: divergence-free with zero potential vorticity."""
    adv = Advection(grid, dealias)
    return p_project(leray_project(adv.divergence_form(uqg), grid), grid, params)


def gb_samples(traj_qg: Trajectory, params: PhysicalParams, dealias: float = 2 / 3) -> ForcingSamples:
    if traj_qg.states is None:
        raise ValueError("quasi-geostrophic trajectory must carry states")
    vals = np.array([compute_gb(u, traj_qg.grid, params, dealias) for u in traj_qg.states])
    return ForcingSamples(traj_qg.times, vals)


def solve_we(
    osc0: np.ndarray,
    gb: ForcingSamples,
    grid: TorusGrid,
    params: PhysicalParams,
    cfg: SolverConfig,
    propagator: LinearPropagator | None = None,
) -> Trajectory:
    """Exact Duhamel propagation of ``d_t W - nu Delta W + (1/eps) P A W = -G^b``.

    The forcing is linear between consecutive samples of ``gb``; the output is
    recorded at the solver's sample times, which must lie on the forcing grid.
    """
    prop = propagator or LinearPropagator(grid, params)
    times = cfg.sample_times()
    if gb.times[0] > 0 or gb.times[-1] < times[-1] * (1 - 1e-12):
        raise ValueError("forcing samples do not cover the requested horizon")
    rec = _Recorder(grid, cfg)
    w = osc0.copy()
    rec(0.0, w)
    ft = gb.times
    for a, b in zip(times[:-1], times[1:]):
        ia = int(np.argmin(np.abs(ft - a)))
        ib = int(np.argmin(np.abs(ft - b)))
        if abs(ft[ia] - a) > 1e-9 * max(1.0, b) or abs(ft[ib] - b) > 1e-9 * max(1.0, b):
            raise ValueError("sample times are not on the forcing grid")
        for k in range(ia, ib):
            w = prop.step(w, ft[k + 1] - ft[k], -gb.values[k], -gb.values[k + 1])
        rec(b, w)
    return rec.finish()


def compute_delta(traj_pe: Trajectory, traj_qg: Trajectory, traj_we: Trajectory) -> Trajectory:
    """``delta = U - U_QG - W`` sample by sample."""
    for other in (traj_qg, traj_we):
        if len(other.times) != len(traj_pe.times) or np.max(np.abs(other.times - traj_pe.times)) > 1e-12:
            raise ValueError("trajectories do not share a time grid")
    grid = traj_pe.grid
    states = traj_pe.states - traj_qg.states - traj_we.states
    norms = {"L2": np.array([l2_norm(d, grid) for d in states])}
    for key in traj_pe.norms:
        if key.startswith("H"):
            s = float(key[1:])
            norms[key] = np.array([hs_norm(d, grid, s) for d in states])
    return Trajectory(traj_pe.times.copy(), states, norms, grid)


def assemble_forcings(
    delta: np.ndarray,
    uqg: np.ndarray,
    we: np.ndarray,
    grid: TorusGrid,
    dealias: float = 2 / 3,
) -> list[np.ndarray]:
    """The eight transport terms ``F_1 .. F_8`` driving ``delta``."""
    adv = Advection(grid, dealias)
    pairs = [(delta, delta), (delta, uqg), (uqg, delta), (delta, we), (we, delta), (uqg, we), (we, uqg), (we, we)]
    return [adv.pe_term(a, b) for a, b in pairs]


def residual_check(
    traj_delta: Trajectory,
    forcings: Sequence[Sequence[np.ndarray]] | dict,
    params: PhysicalParams,
    index: int | None = None,
    method: str = "plain",
    propagator: LinearPropagator | None = None,
) -> tuple[float, float]:
    """Residual of the error equation at an interior sample by centred differences.

    ``forcings[k]`` holds the eight terms at sample ``k``. Returns
    ``(residual_L2, forcing_scale_L2)`` at sample ``index`` (middle by default).

    ``method="plain"`` differences ``delta`` itself and applies the linear
    operator in field form. ``method="interaction"`` differences
    ``exp(-(t - t_k) L) delta(t)`` instead, which removes the fast linear
    oscillation from the truncation error so only the slow part is
    differenced.
    """
    grid = traj_delta.grid
    t = traj_delta.times
    k = len(t) // 2 if index is None else index
    if not 0 < k < len(t) - 1:
        raise ValueError("need an interior sample")
    h1, h2 = t[k] - t[k - 1], t[k + 1] - t[k]
    if abs(h1 - h2) > 1e-12 * max(h1, h2):
        raise ValueError("centred differences need a uniform grid")
    d = traj_delta.states
    total = np.sum(forcings[k], axis=0)
    if method == "plain":
        res = (d[k + 1] - d[k - 1]) / (2 * h1) - apply_linear(d[k], grid, params) - total
    elif method == "interaction":
        prop = propagator or LinearPropagator(grid, params)
        res = (prop.apply(d[k + 1], -h1) - prop.apply(d[k - 1], h1)) / (2 * h1) - total
    else:
        raise ValueError(f"unknown method {method!r}")
    return l2_norm(res, grid), l2_norm(total, grid)


def blowup_monitor(traj: Trajectory) -> np.ndarray:
    """Running ``int_0^t ||grad U||^2_{H^{1/2}}`` from the cached ``H1.5`` norms."""
    if "H1.5" not in traj.norms:
        raise ValueError("trajectory lacks the H1.5 norm cache")
    rate = traj.norms["H1.5"] ** 2
    out = np.zeros_like(rate)
    out[1:] = np.cumsum(0.5 * np.diff(traj.times) * (rate[1:] + rate[:-1]))
    return out


# -- coupled run ----------------------------------------------------------------------


@dataclasses.dataclass
class CoupledRun:
    """Lock-step primitive / limit / oscillation run with the error recorded on the fly."""

    pe: Trajectory
    qg: Trajectory
    we: Trajectory
    delta: Trajectory
    gb_integral: dict[str, float]
    blowup: float


def run_coupled(
    u0: np.ndarray,
    omega0: np.ndarray,
    osc0: np.ndarray,
    grid: TorusGrid,
    params: PhysicalParams,
    cfg: SolverConfig,
    gb_norm_indices: Sequence[float] = (0.5,),
    on_sample: Callable[[float, np.ndarray, np.ndarray, np.ndarray], None] | None = None,
) -> CoupledRun:
    """Advance ``U``, ``omega`` and ``W`` together one step at a time.

    ``G^b`` is evaluated at every step so that the oscillation forcing is
    linear on each step. ``on_sample(t, U, U_QG, W)`` is called at every
    sample time, which lets callers accumulate diagnostics without
    storing states.
    """
    pe_step = _PEStepper(grid, params, cfg)
    qg_step = _QGStepper(grid, params, cfg)
    prop = pe_step.prop
    recs = [_Recorder(grid, cfg) for _ in range(4)]
    guard = _BlowupGuard(grid, cfg.blowup_ceiling)
    u = u0.copy()
    om = omega0.copy()
    om[0, 0, 0] = 0.0
    w = osc0.copy()
    uqg = q_reconstruct(om, grid, params)
    gb = compute_gb(uqg, grid, params, cfg.dealias) if cfg.nonlinear else np.zeros_like(u)
    gb_int = {_norm_key(s): 0.0 for s in gb_norm_indices}
    gb_prev = {k: hs_norm(gb, grid, s) for k, s in zip(gb_int, gb_norm_indices)}

    def record(t):
        for rec, v in zip(recs, (u, uqg, w, u - uqg - w)):
            rec(t, v)
        if on_sample is not None:
            on_sample(t, u, uqg, w)

    record(0.0)
    guard.update(u, 0.0, cfg.dt)
    for k in range(1, cfg.n_steps + 1):
        t = k * cfg.dt
        u = pe_step(u)
        om = qg_step(om)
        _check_finite(u, t, "primitive system")
        _check_finite(om, t, "quasi-geostrophic system")
        uqg = q_reconstruct(om, grid, params)
        gb_new = compute_gb(uqg, grid, params, cfg.dealias) if cfg.nonlinear else gb
        w = prop.step(w, cfg.dt, -gb, -gb_new)
        gb = gb_new
        for key, s in zip(gb_int, gb_norm_indices):
            val = hs_norm(gb, grid, s)
            gb_int[key] += 0.5 * cfg.dt * (val + gb_prev[key])
            gb_prev[key] = val
        guard.update(u, t, cfg.dt)
        if k % cfg.sample_every == 0 or k == cfg.n_steps:
            record(t)
    pe, qg, we, delta = (r.finish() for r in recs)
    return CoupledRun(pe, qg, we, delta, gb_int, guard.total)


def write_trajectory(path_prefix: str | Path, traj: Trajectory, params: PhysicalParams, cfg: SolverConfig) -> Path:
    """Write each sample as an ``RLB1`` snapshot plus a JSON manifest; returns the manifest path."""
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    files = []
    if traj.states is not None:
        for k, u in enumerate(traj.states):
            f = prefix.with_name(f"{prefix.name}_{k:05d}.rlb")
            write_snapshot(f, u, traj.grid)
            files.append(f.name)
    manifest = {
        "params": dataclasses.asdict(params),
        "cfg": {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(cfg).items()},
        "grid": {"n": traj.grid.n, "box_length": traj.grid.box_length},
        "times": traj.times.tolist(),
        "norms": {k: v.tolist() for k, v in traj.norms.items()},
        "snapshots": files,
    }
    out = prefix.with_name(prefix.name + "_manifest.json")
    out.write_text(json.dumps(manifest, indent=2))
    return out
