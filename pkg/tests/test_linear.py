import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotstrat.linear import (
    ForcingSamples,
    LinearPropagator,
    apply_linear,
    assemble_B,
    b_matrix_field,
    eigensystem,
    eigenvalues,
    phi_functions,
    propagate,
)
from rotstrat.qg import p_project, potential_vorticity, q_project, q_symbol
from rotstrat.spectral import PhysicalParams, TorusGrid, heat_flow, hs_norm, l2_norm

from conftest import random_state, rel

seeds = st.integers(0, 2**32 - 1)
xis = st.tuples(*(st.floats(-4, 4) for _ in range(3))).filter(lambda x: sum(c * c for c in x) > 1e-3)
froudes = st.floats(0.2, 5.0).filter(lambda f: abs(f - 1) > 1e-2)


def divfree_basis(xi):
    """Orthonormal basis of the divergence-free subspace from an SVD (independent of the library's)."""
    a = np.zeros((1, 4))
    a[0, :3] = xi
    _, _, vt = np.linalg.svd(a)
    return vt[1:].T


def test_assemble_B_examples():
    p = PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0)
    b = assemble_B((1.0, 0.0, 0.0), p)
    assert b[0, 0] == pytest.approx(-1.0)
    assert b[1, 0] == pytest.approx(-10.0)
    assert b[3, 2] == pytest.approx(1 / (0.1 * 2))
    with pytest.raises(ValueError):
        assemble_B((0, 0, 0), p)
    with pytest.raises(ValueError):
        assemble_B((1, 0, 0), PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0, nu_prime=2.0))


def test_assemble_B_matches_field_operator():
    """Every entry equals the symbol of ``-nu|xi|^2 - P A / eps`` applied to unit vectors."""
    g = TorusGrid(8, 5.0)
    p = PhysicalParams(epsilon=0.3, froude=0.6, nu=0.4)
    k = (1, -2, 3)
    idx = tuple(np.array(k) % g.n)
    xi = np.array(k) * g.spacing
    b = assemble_B(xi, p)
    for col in range(4):
        e = np.zeros((4,) + g.shape, dtype=complex)
        e[(col,) + idx] = 1.0
        out = apply_linear(e, g, p)
        assert np.max(np.abs(out[(slice(None),) + idx] - b[:, col])) < 1e-13


@given(xis, froudes, st.floats(0.01, 1.0))
def test_skew_on_divergence_free_subspace(xi, froude, eps):
    p = PhysicalParams(epsilon=eps, froude=froude, nu=0.5)
    sq = float(np.dot(xi, xi))
    b = eps * (assemble_B(xi, p) + 0.5 * sq * np.eye(4))
    v = divfree_basis(xi)
    w = v @ (np.random.default_rng(0).standard_normal(3) + 1j * np.random.default_rng(1).standard_normal(3))
    q = np.vdot(w, b @ w)
    assert abs(q.real) < 1e-12 * np.linalg.norm(b) * np.vdot(w, w).real


def test_gradient_direction_is_discarded():
    p = PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0)
    xi = np.array([0.3, -0.7, 1.1])
    es = eigensystem(xi, p)
    grad_dir = np.append(xi, 0.0)
    for proj in es.projectors:
        assert np.max(np.abs(proj @ grad_dir)) < 1e-12


def test_eigensystem_example():
    p = PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0)
    mu, lam, lam_bar = eigenvalues((1, 0, 0), p)
    assert mu == pytest.approx(-1) and lam == pytest.approx(-1 + 5j) and lam_bar == pytest.approx(-1 - 5j)
    numeric = np.linalg.eigvals(assemble_B((1, 0, 0), p))
    for val in (lam, lam_bar):
        assert np.min(np.abs(numeric - val)) < 1e-12
    with pytest.raises(ValueError):
        eigenvalues((0, 0, 0), p)


@given(xis, froudes, st.floats(1e-3, 1.0), st.floats(1e-3, 2.0))
def test_projector_algebra(xi, froude, eps, nu):
    p = PhysicalParams(epsilon=eps, froude=froude, nu=nu)
    es = eigensystem(xi, p)
    es.check(1e-10)
    v = divfree_basis(xi)
    identity_on_subspace = v @ v.T
    assert np.max(np.abs(es.projectors.sum(axis=0) - identity_on_subspace)) < 1e-10
    b = assemble_B(xi, p)
    for val, proj in zip(es.values, es.projectors):
        assert np.max(np.abs(b @ proj - val * proj)) < 1e-10 * max(1.0, abs(val))
    assert np.max(np.abs(es.projectors[0] - q_symbol(xi, froude))) < 1e-10


def test_propagate_t0_is_identity(grid16, params):
    u = random_state(grid16, 1)
    assert np.array_equal(propagate(u, 0.0, grid16, params), u)


def test_qg_data_follow_heat_flow(grid16, params):
    u = q_project(random_state(grid16, 2), grid16, params)
    out = propagate(u, 1.7, grid16, params)
    assert rel(out, heat_flow(u, grid16, params.nu, 1.7)) < 1e-12


@given(seeds, st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_semigroup_and_isometry(seed, t, s):
    g = TorusGrid(8, 3.0)
    p = PhysicalParams(epsilon=0.05, froude=2.0, nu=0.2)
    u = random_state(g, seed)
    prop = LinearPropagator(g, p)
    composed = prop.apply(prop.apply(u, s), t)
    assert rel(composed, prop.apply(u, t + s)) < 1e-10
    n1 = l2_norm(prop.apply(u, t), g)
    n0 = l2_norm(heat_flow(u, g, p.nu, t), g)
    assert abs(n1 - n0) < 1e-10 * n0


def test_oscillating_modes_follow_closed_form(grid16, params):
    u = p_project(random_state(grid16, 3), grid16, params)
    prop = LinearPropagator(grid16, params)
    t = 0.9
    c = prop.coefficients(u)
    x1, x2, x3 = grid16.xi
    with np.errstate(invalid="ignore", divide="ignore"):
        omega = np.sqrt(x1**2 + x2**2 + params.froude**2 * x3**2) / (params.froude * grid16.xi_norm)
    omega[0, 0, 0] = 0
    damp = np.exp(-params.nu * grid16.xi_sq * t)
    expect = prop.synthesize(np.stack([0 * c[0], damp * np.exp(1j * t * omega / params.epsilon) * c[1],
                                       damp * np.exp(-1j * t * omega / params.epsilon) * c[2]]))
    assert rel(prop.apply(u, t), expect) < 1e-12
    assert np.max(np.abs(c[0])) < 1e-12 * np.max(np.abs(u))


def test_energy_dissipation_rate(grid16, params):
    u = random_state(grid16, 4)
    prop = LinearPropagator(grid16, params)
    h = 1e-4
    e = lambda f: l2_norm(f, grid16) ** 2
    t = 0.5
    mid = prop.apply(u, t)
    fd = (e(prop.apply(u, t + h)) - e(prop.apply(u, t - h))) / (2 * h)
    dissipation = -2 * params.nu * hs_norm(mid, grid16, 1.0) ** 2
    assert abs(fd - dissipation) < 1e-6 * abs(dissipation)


def test_potential_vorticity_stays_zero(grid16, params):
    rng = np.random.default_rng(8)
    u = p_project(random_state(grid16, 5), grid16, params)
    times = np.linspace(0, 1, 5)
    forcing = ForcingSamples(times, np.array([p_project(random_state(grid16, 10 + k), grid16, params) for k in range(5)]))
    out = propagate(u, 1.0, grid16, params, forcing)
    assert np.max(np.abs(potential_vorticity(out, grid16, params))) < 1e-10 * np.max(np.abs(u))
    assert rng is not None


def test_forcing_grid_must_cover_horizon(grid16, params):
    u = random_state(grid16, 6)
    f = ForcingSamples(np.array([0.0, 0.5]), np.zeros((2, 4) + grid16.shape))
    with pytest.raises(ValueError):
        propagate(u, 1.0, grid16, params, f)
    with pytest.raises(ValueError):
        ForcingSamples(np.array([0.0, 0.0]), np.zeros((2, 4) + grid16.shape))


def test_duhamel_linear_forcing_matches_fine_rk4():
    """Exponential quadrature with a linear-in-time forcing against RK4 on the mode matrices."""
    g = TorusGrid(8, 4.0)
    p = PhysicalParams(epsilon=0.2, froude=2.0, nu=0.1)
    u0 = random_state(g, 7)
    g0 = random_state(g, 8)
    g1 = random_state(g, 9)
    t_end = 0.5
    out = propagate(u0, t_end, g, p, ForcingSamples(np.array([0.0, t_end]), np.array([g0, g1])))
    ref = _rk4_reference(u0, g, p, t_end, 5000, lambda t: g0 + (g1 - g0) * t / t_end)
    assert rel(out, ref) < 1e-10


def _rk4_reference(u0, grid, params, t_end, steps, forcing=None):
    b = b_matrix_field(grid, params)
    m = np.moveaxis(b.reshape(4, 4, -1), -1, 0)
    f = lambda t, y: (m @ y[..., None])[..., 0] + (0 if forcing is None else _flat(forcing(t)))
    y = _flat(u0)
    h = t_end / steps
    t = 0.0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return np.moveaxis(y, 0, -1).reshape(u0.shape)


def _flat(u):
    return np.moveaxis(u.reshape(4, -1), 0, -1)


def test_phi_functions_series_branch():
    z = np.array([1e-8, 0.3j, -0.49, 0.6 + 0.2j, -5.0])
    p1, p2 = phi_functions(z)
    import mpmath

    mpmath.mp.dps = 50
    for zi, a, b in zip(z, p1, p2):
        zm = mpmath.mpc(zi)
        e1 = (mpmath.exp(zm) - 1) / zm
        e2 = (mpmath.exp(zm) - 1 - zm) / zm**2
        assert abs(complex(e1) - a) < 1e-15 and abs(complex(e2) - b) < 1e-15


def test_step_cost_independent_of_epsilon():
    g = TorusGrid(32)
    u = random_state(g, 1)
    props = {eps: LinearPropagator(g, PhysicalParams(epsilon=eps, froude=2.0, nu=0.1)) for eps in (0.1, 0.001)}
    best = {eps: np.inf for eps in props}
    for prop in props.values():
        prop.step(u, 1e-3, u, u)
    # interleaved repetitions, minimum wall time per batch
    for _ in range(15):
        for eps, prop in props.items():
            t0 = time.perf_counter()
            for _ in range(3):
                prop.step(u, 1e-3, u, u)
            best[eps] = min(best[eps], time.perf_counter() - t0)
    spread = abs(best[0.1] - best[0.001]) / min(best.values())
    assert spread < 0.05, best
