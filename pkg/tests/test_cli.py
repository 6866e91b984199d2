import json
import math

import numpy as np
import pytest

from rotstrat import cli
from rotstrat.lab import ExperimentConfig
from rotstrat.linear import propagate
from rotstrat.qg import decompose
from rotstrat.spectral import PhysicalParams, TorusGrid, random_state, read_snapshot, write_snapshot

SMALL = {
    "grid": {"n": 16, "box_length": 8 * math.pi},
    "solver": {"dt": 0.01, "t_end": 0.05, "sample_every": 5},
}


@pytest.fixture
def snapshot(tmp_path):
    grid = TorusGrid(8, 4 * math.pi)
    u = random_state(grid, 3)
    path = tmp_path / "u.rlb"
    write_snapshot(path, u, grid)
    return path, u, grid


def write_config(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({**SMALL, **kw}))
    return str(path)


def test_validate_exit_codes(tmp_path, capsys):
    assert cli.main(["validate", write_config(tmp_path)]) == 0
    assert "ok" in capsys.readouterr().out
    assert cli.main(["validate", write_config(tmp_path, delta=0.3)]) == 2
    assert "δ ∈ ]0, 1/4[" in capsys.readouterr().out
    assert cli.main(["validate", write_config(tmp_path, bogus=1)]) == 2
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2


def test_decompose_matches_library(snapshot, tmp_path, capsys):
    path, u, grid = snapshot
    prefix = tmp_path / "out"
    assert cli.main(["decompose", str(path), "--out-prefix", str(prefix), "--epsilon", "0.05"]) == 0
    qg, _ = read_snapshot(tmp_path / "out_qg.rlb")
    osc, _ = read_snapshot(tmp_path / "out_osc.rlb")
    parts = decompose(u, grid, PhysicalParams(epsilon=0.05, nu=0.1, froude=2.0))
    assert np.array_equal(qg, parts.qg_part) and np.array_equal(osc, parts.osc_part)
    assert set(json.loads(capsys.readouterr().out)) == {"L2_qg", "L2_osc"}


def test_propagate_matches_library(snapshot, tmp_path):
    path, u, grid = snapshot
    out = tmp_path / "v.rlb"
    assert cli.main(["propagate", str(path), str(out), "--time", "0.3"]) == 0
    v, g = read_snapshot(out)
    assert g.n == grid.n
    assert np.array_equal(v, propagate(u, 0.3, grid, PhysicalParams(epsilon=0.1, nu=0.1, froude=2.0)))


def test_bad_snapshot_is_config_error(tmp_path):
    bad = tmp_path / "bad.rlb"
    bad.write_bytes(b"XXXX" + bytes(40))
    assert cli.main(["propagate", str(bad), str(tmp_path / "o.rlb"), "--time", "1"]) == 2


def test_simulate_and_numeric_failure(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["simulate", write_config(tmp_path), "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["delta_E_half"] > 0
    cfg = write_config(tmp_path, solver={**SMALL["solver"], "blowup_ceiling": 1e-12})
    assert cli.main(["simulate", cfg, "--out-dir", str(out)]) == 3


def test_sweep_writes_reports(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert cli.main(["sweep", write_config(tmp_path, mode="modulated"), "--out-dir", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert len(summary["files"]) == 2
    assert cli.main(["sweep", write_config(tmp_path, gamma=0.2), "--out-dir", str(out)]) == 2


def test_kernel_decay_small(tmp_path, capsys):
    argv = ["kernel-decay", "--sigma-min", "5", "--sigma-max", "500", "--count", "6", "--h", "0.0625",
            "--pieces", "whole", "--csv", str(tmp_path / "k.csv")]
    assert cli.main(argv) == 0
    fits = json.loads(capsys.readouterr().out)
    assert fits[0]["piece"] == "whole" and (tmp_path / "k.csv").exists()
    # too few sigma values for a fit
    assert cli.main([a if a != "6" else "4" for a in argv]) == 2


def test_argument_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == 2


def test_config_roundtrip_through_file(tmp_path):
    cfg = ExperimentConfig.from_json(write_config(tmp_path))
    assert cfg.grid.n == 16
