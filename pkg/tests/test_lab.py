import csv
import dataclasses
import json
import math

import numpy as np
import pytest

from rotstrat import lab
from rotstrat.lab import ConfigError, ExperimentConfig, RateReport
from rotstrat.qg import potential_vorticity, q_project
from rotstrat.spectral import hs_norm

SMALL = {
    "grid": {"n": 16, "box_length": 8 * math.pi},
    "solver": {"dt": 0.01, "t_end": 0.1, "sample_every": 5},
}


def small(**kw):
    return ExperimentConfig.from_dict({**SMALL, **kw})


def groups(cfg):
    return {v.group for v in lab.validate_config(cfg)}


def test_eta0_and_default_prediction():
    assert lab.eta0(0.2, 0.05) == pytest.approx(0.25)
    cfg = ExperimentConfig()
    assert lab.predicted_exponent(cfg, 0.5) == pytest.approx(0.05)
    assert lab.composite_exponent(cfg) == pytest.approx((0.25 - 0.125) * 0.2)


# hand evaluations of min(alpha0, delta/2 - gamma, delta/2 - gamma + (1/2 - s)/2) and min(alpha0, kappa)
PREDICTIONS = [
    (dict(delta=0.2, gamma=0.05), 0.5, 0.05),
    (dict(delta=0.2, gamma=0.05), 0.55, 0.025),
    (dict(delta=0.2, gamma=0.05), 0.6, 0.0),
    (dict(delta=0.1, gamma=0.0), 0.5, 0.05),
    (dict(delta=0.24, gamma=0.02), 0.5, 0.10),
    (dict(delta=0.24, gamma=0.02, alpha0=0.05), 0.5, 0.05),
    (dict(delta=0.16, gamma=0.04, alpha0=0.5), 0.5, 0.04),
    (dict(mode="modulated", m_exponent=0.1), 0.5, 0.1),
    (dict(mode="modulated", m_exponent=0.3, alpha0=0.2), 0.5, 0.2),
    (dict(mode="limit"), 0.5, None),
]


@pytest.mark.parametrize("kw, s, expect", PREDICTIONS)
def test_predicted_exponent_table(kw, s, expect):
    got = lab.predicted_exponent(ExperimentConfig(**kw), s)
    if expect is None:
        assert got is None
    else:
        assert got == pytest.approx(expect, abs=1e-15)


def test_validator_spec_examples():
    assert "delta window" in groups(ExperimentConfig(delta=0.3))
    assert groups(ExperimentConfig(p=2, r=6, theta=1)) == set()
    assert "gamma window" in groups(ExperimentConfig(delta=0.2, gamma=0.1))
    assert groups(ExperimentConfig(gamma=0.0)) == set()
    msgs = [str(v) for v in lab.validate_config(ExperimentConfig(delta=0.3))]
    assert any("δ ∈ ]0, 1/4[" in m for m in msgs)


def test_validator_other_windows():
    assert "eta window" in groups(ExperimentConfig(eta=0.9))
    assert "eta window" in groups(ExperimentConfig(s_values=(0.5, 0.7)))
    assert "eta window" in groups(ExperimentConfig(eta_prime=0.3))
    assert "strichartz window" in groups(ExperimentConfig(p=7.0))
    assert "k0 bound" in groups(ExperimentConfig(k0=0.3))
    assert "alpha echo" in groups(ExperimentConfig(alpha=0.2))
    assert groups(ExperimentConfig(alpha=0.1)) == set()
    assert "alpha3 window" in groups(ExperimentConfig(alpha3=0.2))
    assert groups(ExperimentConfig(alpha3=0.1)) == set()
    assert "data" in groups(ExperimentConfig(epsilons=(0.1, 0.2)))
    assert "data" in groups(ExperimentConfig(mode="other"))
    assert "data" in groups(ExperimentConfig.from_dict({"solver": {"dt": 0.3}}))


def test_config_strict_parsing(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"deltaa": 0.2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"grid": {"size": 32}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"delta": "0.2"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"grid": {"n": 32.5}})
    cfg = small(delta=0.15, epsilons=[0.2, 0.1, 0.05, 0.025])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    assert cfg.grid.n == 16 and cfg.epsilons == (0.2, 0.1, 0.05, 0.025)


def _synthetic_report(powers, eps=(0.2, 0.1, 0.05, 0.025)):
    rows = []
    for s, power in powers.items():
        for e in eps:
            rows.append({"epsilon": e, "s": s, "delta_Es_norm": 3.0 * e**power, "we_strichartz": None,
                         "composite_L2Linf": None, "predicted_exp": 0.2})
    return RateReport(
        config={"tolerance": 0.05}, rows=rows, slopes={}, predicted={repr(float(s)): 0.2 for s in powers},
        flags={}, monotone={}, composite_slope=None, composite_predicted=None, eta0=0.25, alpha=0.1,
        constants={}, failures={}, wall_clock=0.0,
    )


def test_regression_recovers_synthetic_slope():
    res = lab.rate_regression(_synthetic_report({0.5: 0.3, 0.55: 0.1}))
    assert res["0.5"]["slope"] == pytest.approx(0.3, abs=1e-6)
    assert res["0.5"]["pass"] is True
    assert res["0.55"]["slope"] == pytest.approx(0.1, abs=1e-6)
    assert res["0.55"]["pass"] is False
    assert lab.rate_regression(_synthetic_report({0.55: 0.1}), tol=0.2)["0.55"]["pass"] is True


def test_regression_degenerate_fit():
    with pytest.raises(lab.DegenerateFitError):
        lab.rate_regression(_synthetic_report({0.5: 0.3}, eps=(0.2, 0.1, 0.05)))
    rep = _synthetic_report({0.5: 0.3})
    rep.rows[0]["delta_Es_norm"] = 0.0
    with pytest.raises(lab.DegenerateFitError):
        lab.rate_regression(rep)


@pytest.mark.parametrize("mode", ["growing", "modulated"])
def test_initial_data_norms_and_projections(mode):
    cfg = ExperimentConfig(mode=mode)
    g = cfg.grid_obj()
    s = 0.5 + cfg.delta
    for eps in (0.2, 0.05):
        p = cfg.params(eps)
        u0, qg, osc = lab.make_initial_data(cfg, eps)
        if mode == "growing":
            target = cfg.c0_bound * eps ** (-cfg.gamma)
        else:
            target = cfg.c0_bound * cfg.m0 * eps**cfg.m_exponent * eps ** (-cfg.delta / 2)
        assert hs_norm(osc, g, s) == pytest.approx(target, rel=1e-10)
        assert hs_norm(qg, g, s, homogeneous=False) == pytest.approx(cfg.c0_bound * cfg.rho, rel=1e-10)
        pert = u0 - qg - osc
        assert hs_norm(pert, g, s, homogeneous=False) == pytest.approx(0.5 * cfg.c0_bound * eps, rel=1e-10)
        scale = np.max(np.abs(u0))
        assert np.max(np.abs(q_project(osc, g, p))) < 1e-10 * scale
        assert np.max(np.abs(q_project(qg, g, p) - qg)) < 1e-10 * scale
        assert np.max(np.abs(q_project(pert, g, p) - pert)) < 1e-10 * scale
        assert np.max(np.abs(potential_vorticity(qg, g, p))) > 0


def test_initial_data_gamma_zero_and_limit():
    cfg = ExperimentConfig(gamma=0.0)
    g = cfg.grid_obj()
    a = lab.make_initial_data(cfg, 0.2)[2]
    b = lab.make_initial_data(cfg, 0.025)[2]
    assert hs_norm(a, g, 0.7) == pytest.approx(hs_norm(b, g, 0.7), rel=1e-12)
    u0, qg, osc = lab.make_initial_data(ExperimentConfig(mode="limit"), 0.1)
    assert np.array_equal(u0, qg) and not osc.any()


def test_initial_data_unreachable_norm():
    cfg = ExperimentConfig(spectrum_taper=1e-3)
    with pytest.raises(lab.UnreachableNormError):
        lab.make_initial_data(cfg, 0.1)


def test_linear_consistent_data_give_zero_error():
    cfg = small(mode="limit", solver={**SMALL["solver"], "nonlinear": False})
    rep = lab.epsilon_sweep(cfg)
    vals = [r["delta_Es_norm"] for r in rep.rows]
    # roundoff relative to the data size
    assert len(vals) == 8 and max(vals) < 1e-12 * cfg.c0_bound * cfg.rho


def test_sweep_is_deterministic_and_reported(tmp_path):
    cfg = small(mode="modulated")
    seen = []
    a = lab.epsilon_sweep(cfg, progress=lambda e, rows: seen.append(e))
    b = lab.epsilon_sweep(cfg)
    strip = lambda rep: [tuple(r.values()) for r in rep.rows]
    assert strip(a) == strip(b)
    assert seen == list(cfg.epsilons)
    assert set(a.slopes) == {"0.5", "0.55"} and a.predicted["0.5"] == pytest.approx(0.1)
    assert a.failures == {}
    assert a.composite_slope is not None
    # serialisation round trip
    paths = lab.emit_report(a, tmp_path)
    back = RateReport.from_dict(json.loads(paths[1].read_text()))
    assert back.rows == a.rows and back.slopes == a.slopes and back.config == a.config
    with paths[0].open() as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == lab.CSV_COLUMNS and len(rows) == 8
    assert float(rows[0]["delta_Es_norm"]) == pytest.approx(a.rows[0]["delta_Es_norm"])


def test_sweep_records_failures():
    cfg = small(solver={**SMALL["solver"], "blowup_ceiling": 1e-12})
    rep = lab.epsilon_sweep(cfg)
    assert set(rep.failures) == {repr(e) for e in cfg.epsilons}
    assert all(r["delta_Es_norm"] is None for r in rep.rows)
    assert rep.slopes == {"0.5": None, "0.55": None}


def test_sweep_rejects_invalid_config():
    with pytest.raises(ConfigError):
        lab.epsilon_sweep(small(delta=0.3))


def test_empty_report_files(tmp_path):
    rep = _synthetic_report({})
    paths = lab.emit_report(rep, tmp_path, stem="empty")
    assert paths[0].read_text().strip() == ",".join(lab.CSV_COLUMNS)
    data = json.loads(paths[1].read_text())
    assert data["rows"] == [] and data["slopes"] == {}
    with pytest.raises(ValueError):
        lab.emit_report(rep, tmp_path, formats=("xml",))


def test_config_dataclass_roundtrip():
    cfg = ExperimentConfig()
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert dataclasses.replace(cfg, eta_prime=0.05).eta_prime_value == 0.05
    assert cfg.eta_prime_value == cfg.eta / 2
