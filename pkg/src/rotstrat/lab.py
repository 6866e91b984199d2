"""Ill-prepared data, epsilon sweeps, rate regressions and report files."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .kernel import strichartz_admissible
from .littlewood_paley import lp_norm
from .qg import p_project, potential_vorticity, q_project
from .solver import SolverConfig, SolverError, run_coupled
from .spectral import (
    PhysicalParams,
    TorusGrid,
    abs_derivative,
    backward,
    forward,
    hs_norm,
    leray_project,
)

__all__ = [
    "ConfigError",
    "UnreachableNormError",
    "DegenerateFitError",
    "GridSettings",
    "SolverSettings",
    "PhysicsSettings",
    "ExperimentConfig",
    "Violation",
    "validate_config",
    "eta0",
    "predicted_exponent",
    "composite_exponent",
    "make_initial_data",
    "RateReport",
    "rate_regression",
    "epsilon_sweep",
    "emit_report",
    "CSV_COLUMNS",
]

K0_MAX = 3 / (8 * math.sqrt(2))
CSV_COLUMNS = ("epsilon", "s", "delta_Es_norm", "we_strichartz", "composite_L2Linf", "predicted_exp")
MODES = ("growing", "modulated", "limit")


class ConfigError(ValueError):
    """Malformed configuration (unknown key, wrong type)."""


class UnreachableNormError(ValueError):
    """The requested spectrum has no support on the grid."""


class DegenerateFitError(ValueError):
    """Too few points or non-positive norms in a log-log fit."""


@dataclasses.dataclass(frozen=True)
class GridSettings:
    n: int = 32
    box_length: float = 16 * math.pi


@dataclasses.dataclass(frozen=True)
class SolverSettings:
    dt: float = 2e-3
    t_end: float = 2.0
    dealias: float = 2 / 3
    integrator: str = "IF-RK4"
    sample_every: int = 5
    nonlinear: bool = True
    blowup_ceiling: float | None = None


@dataclasses.dataclass(frozen=True)
class PhysicsSettings:
    nu: float = 0.1
    froude: float = 2.0


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Sweep configuration; construction never validates, see :func:`validate_config`.

    ``mode`` selects the oscillation amplitude: ``growing`` uses
    ``c0_bound * eps^-gamma``, ``modulated`` uses ``c0_bound * m(eps) * eps^(-delta/2)``
    with ``m(eps) = m0 * eps^m_exponent``, and ``limit`` zeroes the
    oscillations and the quasi-geostrophic perturbation.
    """

    delta: float = 0.2
    gamma: float = 0.05
    alpha0: float = 1.0
    c0_bound: float = 100.0
    rho: float = 0.5
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    s_values: tuple[float, ...] = (0.5, 0.55)
    seed: int = 0
    mode: str = "growing"
    m0: float = 1.0
    m_exponent: float = 0.1
    c_extra: float = 0.9
    eta: float = 0.25
    eta_prime: float | None = None
    p: float = 2.0
    r: float = 6.0
    theta: float = 1.0
    k0: float = 0.25
    alpha: float | None = None
    alpha3: float | None = None
    spectrum_slope: float = 1.0
    spectrum_taper: float = 0.75
    tolerance: float = 0.05
    whole_space_strichartz: bool = False
    grid: GridSettings = GridSettings()
    solver: SolverSettings = SolverSettings()
    physics: PhysicsSettings = PhysicsSettings()

    _NESTED = {"grid": GridSettings, "solver": SolverSettings, "physics": PhysicsSettings}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        kwargs: dict[str, Any] = {}
        known = {f.name: f for f in dataclasses.fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in cls._NESTED:
                kwargs[key] = _nested_from_dict(cls._NESTED[key], value, key)
            elif key in ("epsilons", "s_values"):
                if not isinstance(value, (list, tuple)) or not all(_is_number(v) for v in value):
                    raise ConfigError(f"{key} must be a list of numbers")
                kwargs[key] = tuple(float(v) for v in value)
            else:
                kwargs[key] = _coerce(key, value, known[key].default)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["epsilons"] = list(self.epsilons)
        out["s_values"] = list(self.s_values)
        return out

    def grid_obj(self) -> TorusGrid:
        return TorusGrid(self.grid.n, self.grid.box_length)

    def params(self, epsilon: float) -> PhysicalParams:
        return PhysicalParams(epsilon=epsilon, nu=self.physics.nu, froude=self.physics.froude)

    def solver_config(self) -> SolverConfig:
        s = self.solver
        indices = sorted({0.5, 1.5} | {float(v) for v in self.s_values} | {float(v) + 1 for v in self.s_values})
        return SolverConfig(
            dt=s.dt,
            t_end=s.t_end,
            dealias=s.dealias,
            integrator=s.integrator,
            sample_every=s.sample_every,
            nonlinear=s.nonlinear,
            blowup_ceiling=s.blowup_ceiling,
            store_states=False,
            norm_indices=tuple(indices),
        )

    @property
    def eta_prime_value(self) -> float:
        return self.eta / 2 if self.eta_prime is None else self.eta_prime


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool) and key in ("seed", "n", "sample_every"):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key} must be an integer")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if value is None:
        return None
    if not _is_number(value):
        raise ConfigError(f"{key} must be a number")
    return float(value)


def _nested_from_dict(kind, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name: f for f in dataclasses.fields(kind)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {name}.{key!r}")
        kwargs[key] = _coerce(key, value, known[key].default)
    return kind(**kwargs)


# -- admissibility ------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Violation:
    group: str
    constraint: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.group}] {self.constraint}: {self.detail}"


def eta0(delta: float, gamma: float) -> float:
    """``eta_0`` with ``gamma = (1 - 2 eta_0) delta / 2``."""
    return 0.5 * (1 - 2 * gamma / delta)


def validate_config(cfg: ExperimentConfig) -> list[Violation]:
    """Every admissibility inequality on the exponents; an empty list means valid.

    Groups: ``delta window``, ``gamma window``, ``eta window``,
    ``strichartz window``, ``k0 bound``, ``alpha echo`` and, when
    ``alpha3`` is set, ``alpha3 window``; ``data`` collects the plumbing
    checks (epsilon list, amplitudes, mode).
    """
    out: list[Violation] = []
    d, g = cfg.delta, cfg.gamma

    delta_ok = 0 < d < 0.25
    if not delta_ok:
        out.append(Violation("delta window", "δ ∈ ]0, 1/4[", f"delta = {d:g}"))

    # gamma = 0 is accepted: it is the epsilon-independent oscillation limit
    if not (delta_ok and 0 <= g < d / 2):
        out.append(Violation("gamma window", "γ ∈ ]0, δ/2[", f"gamma = {g:g}, delta/2 = {d / 2:g}"))

    if delta_ok and 0 <= g < d / 2:
        e0 = eta0(d, g)
        bound = min(1 - 2 * g / d, 1 / (3 * d) - 1, 1 / (2 * d) - 2)
        if not 0 < cfg.eta < bound:
            out.append(
                Violation(
                    "eta window",
                    "0 < η < min(1 - 2γ/δ, 1/(3δ) - 1, 1/(2δ) - 2)",
                    f"eta = {cfg.eta:g}, bound = {bound:g}",
                )
            )
        if not 0 < cfg.c_extra < 1:
            out.append(Violation("eta window", "c ∈ ]0, 1[", f"c = {cfg.c_extra:g}"))
        ep = cfg.eta_prime_value
        if not 0 < ep < min(cfg.eta, cfg.c_extra):
            out.append(Violation("eta window", "η' ∈ ]0, min(η, c)[", f"eta' = {ep:g}"))
        top = 0.5 + 2 * e0 * d
        bad = [s for s in cfg.s_values if not 0.5 <= s < top]
        if bad or not cfg.s_values:
            out.append(Violation("eta window", "s ∈ [1/2, 1/2 + 2η₀δ[", f"s = {bad or 'empty'}, upper = {top:g}"))

    ok, why = strichartz_admissible(cfg.p, cfg.r, cfg.theta)
    if not ok:
        out.append(
            Violation("strichartz window", "r ≥ 2, θ ∈ [0, 1], p ∈ [1, 4/(θ(1 - 2/r))]", f"(p, r, θ) = ({cfg.p:g}, {cfg.r:g}, {cfg.theta:g}) fails {why}")
        )

    if not 0 < cfg.k0 < K0_MAX:
        out.append(Violation("k0 bound", "0 < k₀ < 3/(8√2)", f"k0 = {cfg.k0:g}, bound = {K0_MAX:.6f}"))

    alpha = 0.5 - 2 * d
    if cfg.alpha is not None and abs(cfg.alpha - alpha) > 1e-12:
        out.append(Violation("alpha echo", "α = 1/2 - 2δ", f"alpha = {cfg.alpha:g}, expected {alpha:g}"))
    bad = [s for s in cfg.s_values if not 0 < s - alpha < 1]
    if bad:
        out.append(Violation("alpha echo", "s - α ∈ ]0, 1[", f"s = {bad}, alpha = {alpha:g}"))

    if cfg.alpha3 is not None:
        if not 0 < cfg.alpha3 < 0.5 or not d <= 0.25 - cfg.alpha3 / 2:
            out.append(Violation("alpha3 window", "α₃ ∈ ]0, 1/2[ and δ ≤ 1/4 - α₃/2", f"alpha3 = {cfg.alpha3:g}"))

    eps = list(cfg.epsilons)
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        out.append(Violation("data", "epsilons positive and strictly decreasing", f"{eps}"))
    if cfg.c0_bound < 1:
        out.append(Violation("data", "ℂ₀ ≥ 1", f"c0_bound = {cfg.c0_bound:g}"))
    if not cfg.alpha0 > 0:
        out.append(Violation("data", "α₀ > 0", f"alpha0 = {cfg.alpha0:g}"))
    if not 0 < cfg.rho <= 1:
        out.append(Violation("data", "ρ ∈ ]0, 1]", f"rho = {cfg.rho:g}"))
    if cfg.mode not in MODES:
        out.append(Violation("data", f"mode in {MODES}", repr(cfg.mode)))
    if cfg.mode == "modulated" and not (cfg.m0 > 0 and cfg.m_exponent > 0):
        out.append(Violation("data", "m(ε) = m0 ε^κ with m0 > 0, κ > 0", f"m0 = {cfg.m0:g}, kappa = {cfg.m_exponent:g}"))
    try:
        cfg.solver_config()
        cfg.grid_obj()
        cfg.params(1.0)
    except ValueError as exc:
        out.append(Violation("data", "grid, solver and physics settings", str(exc)))
    return out


# -- predictions ---------------------------------------------------------------------


def predicted_exponent(cfg: ExperimentConfig, s: float) -> float | None:
    """Predicted rate of ``||delta_eps||_{E^s}``; ``None`` when no rate is claimed."""
    if cfg.mode == "growing":
        base = cfg.delta / 2 - cfg.gamma
        return min(cfg.alpha0, base, base + 0.5 * (0.5 - s))
    if cfg.mode == "modulated":
        return min(cfg.alpha0, cfg.m_exponent) if s == 0.5 else None
    return None


def composite_exponent(cfg: ExperimentConfig) -> float | None:
    """Predicted rate of ``|| |D|^{eta' delta} (U - U_QG) ||_{L^2 L^inf}`` (oscillation-free bound)."""
    if cfg.mode != "growing":
        return None
    return min(cfg.alpha0, (eta0(cfg.delta, cfg.gamma) - cfg.eta / 2) * cfg.delta)


# -- initial data ----------------------------------------------------------------------


def _shaped(grid: TorusGrid, rng: np.random.Generator, cfg: ExperimentConfig) -> np.ndarray:
    noise = rng.standard_normal((4,) + grid.shape)
    c = forward(noise, grid)
    k = grid.xi_norm
    shape = np.zeros(grid.shape)
    pos = k > 0
    shape[pos] = k[pos] ** (-cfg.spectrum_slope) * np.exp(-((k[pos] / cfg.spectrum_taper) ** 2))
    c = c * shape * grid.dealias_mask(cfg.solver.dealias)
    for ax in range(3):
        sl = [slice(None)] * 4
        sl[ax + 1] = grid.n // 2
        c[tuple(sl)] = 0.0
    return leray_project(c, grid)


def _rescale(u: np.ndarray, target: float, norm: float, what: str) -> np.ndarray:
    if not norm > 0 or not math.isfinite(norm):
        raise UnreachableNormError(f"{what}: no spectral support on the grid")
    return u * (target / norm)


def make_initial_data(cfg: ExperimentConfig, epsilon: float):
    """``(U_0eps, U_0QG_tilde, osc_0)`` with norms fixed by rescaling.

    The spectral shapes depend only on ``seed``, so across a sweep only the
    amplitudes change with ``epsilon``.
    """
    grid = cfg.grid_obj()
    params = cfg.params(epsilon)
    s = 0.5 + cfg.delta
    rng_qg, rng_pert, rng_osc = (np.random.default_rng(ss) for ss in np.random.SeedSequence(cfg.seed).spawn(3))

    qg = q_project(_shaped(grid, rng_qg, cfg), grid, params)
    qg = _rescale(qg, cfg.c0_bound * cfg.rho, hs_norm(qg, grid, s, homogeneous=False), "quasi-geostrophic data")

    if cfg.mode == "limit":
        return qg.copy(), qg, np.zeros_like(qg)

    pert = q_project(_shaped(grid, rng_pert, cfg), grid, params)
    pert = _rescale(
        pert, 0.5 * cfg.c0_bound * epsilon**cfg.alpha0, hs_norm(pert, grid, s, homogeneous=False), "perturbation"
    )
    osc = p_project(_shaped(grid, rng_osc, cfg), grid, params)
    if cfg.mode == "modulated":
        target = cfg.c0_bound * cfg.m0 * epsilon**cfg.m_exponent * epsilon ** (-cfg.delta / 2)
    else:
        target = cfg.c0_bound * epsilon ** (-cfg.gamma)
    osc = _rescale(osc, target, hs_norm(osc, grid, s), "oscillating data")
    return qg + pert + osc, qg, osc


# -- report -----------------------------------------------------------------------------


@dataclasses.dataclass
class RateReport:
    config: dict
    rows: list[dict]
    slopes: dict[str, float | None]
    predicted: dict[str, float | None]
    flags: dict[str, bool | None]
    monotone: dict[str, bool | None]
    composite_slope: float | None
    composite_predicted: float | None
    eta0: float
    alpha: float
    constants: dict[str, float | None]
    failures: dict[str, str]
    wall_clock: float
    whole_space: dict | None = None
    labels: dict[str, str] = dataclasses.field(
        default_factory=lambda: {
            "torus": "periodic-box sweep: monotonicity and positive slopes are checked, exponents are indicative",
            "whole_space": "whole-space free propagator: quantitative Strichartz exponent",
        }
    )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RateReport":
        return cls(**data)

    def norms(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r["s"] == s and r["delta_Es_norm"] is not None]
        return np.array([r["epsilon"] for r in rows]), np.array([r["delta_Es_norm"] for r in rows])


def _fit(eps: np.ndarray, vals: np.ndarray) -> tuple[float, float]:
    eps, vals = np.asarray(eps, dtype=float), np.asarray(vals, dtype=float)
    if len(eps) < 4:
        raise DegenerateFitError(f"need at least 4 epsilon points, got {len(eps)}")
    if np.any(vals <= 0) or np.any(eps <= 0):
        raise DegenerateFitError("norms and epsilons must be positive for a log-log fit")
    slope, intercept = np.polyfit(np.log(eps), np.log(vals), 1)
    return float(slope), float(intercept)


def rate_regression(report: RateReport, tol: float | None = None) -> dict[str, dict]:
    """Least-squares slope of ``log ||delta_eps||`` against ``log eps`` for every ``s``.

    A row passes when ``slope >= predicted - tol``.
    """
    tol = report.config.get("tolerance", 0.05) if tol is None else tol
    out = {}
    for key, pred in report.predicted.items():
        eps, vals = report.norms(float(key))
        slope, intercept = _fit(eps, vals)
        out[key] = {
            "slope": slope,
            "intercept": intercept,
            "predicted": pred,
            "pass": None if pred is None else bool(slope >= pred - tol),
        }
    return out


def _strictly_decreasing_in_eps(eps: np.ndarray, vals: np.ndarray) -> bool:
    order = np.argsort(eps)
    return bool(np.all(np.diff(vals[order]) > 0))


class _Streams:
    """Time integrands accumulated while the coupled run advances."""

    def __init__(self, cfg: ExperimentConfig, grid: TorusGrid):
        self.grid = grid
        self.order = cfg.eta_prime_value * cfg.delta
        self.r = cfg.r
        self.times: list[float] = []
        self.composite: list[float] = []
        self.we: list[float] = []

    def __call__(self, t, u, uqg, w):
        self.times.append(t)
        diff = abs_derivative(u - uqg, self.grid, self.order)
        vals = backward(diff, self.grid)
        self.composite.append(float(np.sqrt(np.sum(np.abs(vals) ** 2, axis=0)).max()))
        self.we.append(lp_norm(w, self.grid, self.r))

    def time_norm(self, values, p: float) -> float:
        values = np.asarray(values)
        if math.isinf(p):
            return float(values.max())
        return float(np.trapezoid(values**p, self.times) ** (1 / p))


def _es_norm(norms: dict[str, np.ndarray], times: np.ndarray, s: float, nu: float) -> float:
    hs = norms[f"H{s:g}"]
    hs1 = norms[f"H{s + 1:g}"]
    return math.sqrt(float(np.max(hs**2)) + nu * float(np.trapezoid(hs1**2, times)))


def epsilon_sweep(cfg: ExperimentConfig, progress=None) -> RateReport:
    """Run the coupled primitive / limit / oscillation system for every ``epsilon``.

    Per-epsilon failures are recorded and the sweep continues.
    """
    violations = validate_config(cfg)
    if violations:
        raise ConfigError("; ".join(map(str, violations)))
    start = time.perf_counter()
    grid = cfg.grid_obj()
    scfg = cfg.solver_config()
    rows: list[dict] = []
    failures: dict[str, str] = {}
    composite: dict[float, float] = {}
    for eps in cfg.epsilons:
        params = cfg.params(eps)
        u0, qg0, osc0 = make_initial_data(cfg, eps)
        streams = _Streams(cfg, grid)
        try:
            run = run_coupled(u0, potential_vorticity(qg0, grid, params), osc0, grid, params, scfg, on_sample=streams)
        except SolverError as exc:
            failures[repr(eps)] = str(exc)
            for s in cfg.s_values:
                rows.append(_row(eps, s, None, None, None, predicted_exponent(cfg, s)))
            continue
        comp = streams.time_norm(streams.composite, 2.0)
        we = streams.time_norm(streams.we, cfg.p)
        composite[eps] = comp
        for s in cfg.s_values:
            val = _es_norm(run.delta.norms, run.delta.times, s, cfg.physics.nu)
            rows.append(_row(eps, s, val, we, comp, predicted_exponent(cfg, s)))
        if progress is not None:
            progress(eps, rows[-len(cfg.s_values):])

    report = RateReport(
        config=cfg.to_dict(),
        rows=rows,
        slopes={},
        predicted={repr(float(s)): predicted_exponent(cfg, s) for s in cfg.s_values},
        flags={},
        monotone={},
        composite_slope=None,
        composite_predicted=composite_exponent(cfg),
        eta0=eta0(cfg.delta, cfg.gamma),
        alpha=0.5 - 2 * cfg.delta,
        constants={},
        failures=failures,
        wall_clock=0.0,
    )
    for key in report.predicted:
        eps, vals = report.norms(float(key))
        report.monotone[key] = _strictly_decreasing_in_eps(eps, vals) if len(eps) >= 2 else None
        pred = report.predicted[key]
        report.constants[key] = float(np.max(vals / eps**pred)) if pred is not None and len(eps) else None
    try:
        for key, res in rate_regression(report).items():
            report.slopes[key] = res["slope"]
            report.flags[key] = res["pass"]
    except DegenerateFitError:
        for key in report.predicted:
            report.slopes[key] = None
            report.flags[key] = None
    if len(composite) >= 4:
        try:
            report.composite_slope = _fit(np.array(list(composite)), np.array(list(composite.values())))[0]
        except DegenerateFitError:
            pass
    if cfg.whole_space_strichartz:
        from .kernel import strichartz_measure

        report.whole_space = strichartz_measure(cfg.p, cfg.r, cfg.theta, cfg.epsilons, nu=cfg.physics.nu).to_dict()
    report.wall_clock = time.perf_counter() - start
    return report


def _row(eps, s, val, we, comp, pred) -> dict:
    return {
        "epsilon": float(eps),
        "s": float(s),
        "delta_Es_norm": val,
        "we_strichartz": we,
        "composite_L2Linf": comp,
        "predicted_exp": pred,
    }


def emit_report(report: RateReport, out_dir: str | Path, formats: Sequence[str] = ("csv", "json"), stem: str = "sweep") -> list[Path]:
    """Write ``<stem>.csv`` (one row per ``(epsilon, s)``) and/or ``<stem>.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out_dir / f"{stem}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
                writer.writeheader()
                for row in report.rows:
                    writer.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_COLUMNS})
        elif fmt == "json":
            path = out_dir / f"{stem}.json"
            path.write_text(json.dumps(report.to_dict(), indent=2))
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written.append(path)
    return written
