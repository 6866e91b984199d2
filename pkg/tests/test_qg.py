import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotstrat.qg import (
    QGDecomposition,
    decompose,
    deltaF,
    deltaF_inverse,
    gamma_multiplier,
    p_project,
    potential_vorticity,
    q_project,
    q_reconstruct,
    q_symbol,
    xi_F_sq,
)
from rotstrat.spectral import PhysicalParams, TorusGrid, inner, leray_project, random_field

from conftest import random_state, rel

seeds = st.integers(0, 2**32 - 1)
froudes = st.floats(0.2, 5.0).filter(lambda f: abs(f - 1) > 1e-3)


def unit_mode(grid, k, component=None, components=4):
    shape = grid.shape if component is None else (components,) + grid.shape
    out = np.zeros(shape, dtype=complex)
    idx = tuple(np.array(k) % grid.n)
    if component is None:
        out[idx] = 1.0
    else:
        out[(component,) + idx] = 1.0
    return out


def test_pv_single_theta_mode():
    g = TorusGrid(8)
    p = PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0)
    k = (1, 2, 3)
    u = unit_mode(g, k, component=3)
    pv = potential_vorticity(u, g, p)
    assert pv[1, 2, 3] == pytest.approx(-2j * 3)
    pv[1, 2, 3] = 0
    assert np.max(np.abs(pv)) == 0


def test_deltaF_inverse_examples():
    g = TorusGrid(8)
    p = PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0)
    f = unit_mode(g, (0, 0, 1))
    assert deltaF_inverse(f, g, p)[0, 0, 1] == pytest.approx(-0.25)
    assert xi_F_sq(0, 0, 1, 2.0) == 4


@given(seeds, froudes)
def test_deltaF_round_trip(seed, froude):
    g = TorusGrid(16, 6.0)
    p = PhysicalParams(epsilon=0.1, froude=froude, nu=1.0)
    f = random_field(g, 1, np.random.default_rng(seed))
    assert rel(deltaF_inverse(deltaF(f, g, p), g, p), f) < 1e-13
    assert rel(deltaF(deltaF_inverse(f, g, p), g, p), f) < 1e-13


@given(seeds, froudes)
def test_projector_algebra(seed, froude):
    g = TorusGrid(16, 4 * np.pi)
    p = PhysicalParams(epsilon=0.1, froude=froude, nu=1.0)
    u = random_state(g, seed)
    q = q_project(u, g, p)
    o = p_project(u, g, p)
    assert rel(q_project(q, g, p), q) < 1e-12
    assert rel(p_project(o, g, p), o) < 1e-12
    assert np.max(np.abs(q_project(o, g, p))) < 1e-12 * np.max(np.abs(u))
    assert np.max(np.abs(p_project(q, g, p))) < 1e-12 * np.max(np.abs(u))
    assert rel(q + o, u) < 1e-15
    pv = potential_vorticity(u, g, p)
    assert rel(potential_vorticity(q, g, p), pv) < 1e-12
    assert np.max(np.abs(potential_vorticity(o, g, p))) < 1e-12 * np.max(np.abs(pv))
    # recovering omega from its reconstruction
    assert rel(potential_vorticity(q_reconstruct(pv, g, p), g, p), pv) < 1e-12
    norm = abs(inner(u, u, g))
    for s in (0.0, 0.5, 1.0):
        uu = abs(inner(u, u, g, s))
        assert abs(inner(q, o, g, s)) < 1e-12 * uu
    assert norm > 0
    # commute with the Leray projector on divergence-free input
    w = random_field(g, 4, np.random.default_rng(seed + 1))
    lw = leray_project(w, g)
    assert rel(leray_project(q_project(lw, g, p), g), q_project(lw, g, p)) < 1e-12
    assert rel(leray_project(p_project(lw, g, p), g), p_project(lw, g, p)) < 1e-12


def test_decomposition_check(grid16, params):
    u = random_state(grid16, 11)
    parts = decompose(u, grid16, params)
    parts.check(grid16, params)
    bad = QGDecomposition(parts.qg_part + 0.1 * parts.osc_part, 0.9 * parts.osc_part)
    with pytest.raises(ValueError):
        bad.check(grid16, params)


def test_qg_velocity_is_divergence_free(grid16, params):
    from rotstrat.spectral import divergence

    omega = random_field(grid16, 1, np.random.default_rng(2))
    u = q_reconstruct(omega, grid16, params)
    assert np.max(np.abs(divergence(u, grid16))) < 1e-15
    assert np.all(u[2] == 0)


def test_q_symbol_matches_field_projector():
    g = TorusGrid(8, 3.0)
    p = PhysicalParams(epsilon=0.1, froude=0.7, nu=1.0)
    u = random_state(g, 5)
    q = q_project(u, g, p)
    for k in [(1, 2, 3), (0, 0, 1), (-3, 1, 0)]:
        idx = tuple(np.array(k) % g.n)
        xi = np.array(k) * g.spacing
        m = q_symbol(xi, p.froude)
        assert np.max(np.abs(m @ u[(slice(None),) + idx] - q[(slice(None),) + idx])) < 1e-14
        assert np.max(np.abs(m @ m - m)) < 1e-15


def test_gamma_equal_viscosities(grid16):
    p = PhysicalParams(epsilon=0.1, froude=3.0, nu=0.7)
    sym = gamma_multiplier(p)(*grid16.xi)
    heat = -0.7 * grid16.xi_sq
    assert np.max(np.abs(sym - heat)) < 1e-13 * np.max(np.abs(heat))


def test_gamma_closed_form_value():
    p = PhysicalParams(epsilon=0.1, froude=2.0, nu=1.0, nu_prime=3.0)
    assert gamma_multiplier(p)(0.0, 0.0, 1.0) == pytest.approx(-3.0, abs=1e-15)
    assert gamma_multiplier(p)(0.0, 0.0, 0.0) == 0.0


@given(
    st.floats(0.01, 5), st.floats(0.01, 5), froudes,
    st.tuples(*(st.floats(-3, 3) for _ in range(3))).filter(lambda x: sum(c * c for c in x) > 1e-6),
)
def test_gamma_negative(nu, nup, froude, xi):
    p = PhysicalParams(epsilon=0.1, froude=froude, nu=nu, nu_prime=nup)
    assert gamma_multiplier(p)(*xi) < 0
