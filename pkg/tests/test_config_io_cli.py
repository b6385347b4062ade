from __future__ import annotations

import json

import numpy as np
import pytest

from spingauge import cli
from spingauge.config import RunConfig
from spingauge.errors import ConfigError, ShapeMismatch
from spingauge.io import read_csv, read_snapshot, write_csv, write_snapshot
from spingauge.spectral import Grid


def test_config_round_trip():
    cfg = RunConfig.from_text("grid.n = 32\nsolver.dt = 0.01  # comment\nsweep.deltas = 0.1, 0.2\n")
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg and again.sha256() == cfg.sha256()
    assert again["sweep.deltas"] == [0.1, 0.2]


@pytest.mark.parametrize("text", [
    "bogus = 1\n",
    "grid.n = 32\ngrid.n = 64\n",
    "grid.n = 31\n",
    "signature.mu = 2\n",
    "solver.dt = fast\n",
    "grid.n\n",
    "outputs.diagnostics = mass, nonsense\n",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_snapshot_round_trip(tmp_path, rng):
    g = Grid.square(8, 2.0)
    a = rng.normal(size=(2, 8, 8)) + 1j * rng.normal(size=(2, 8, 8))
    b = rng.normal(size=(2, 8, 8)) + 0j
    path = tmp_path / "x.snap"
    write_snapshot(path, g, {"a": a, "b": b}, 0.25, (1, -1))
    header, data = read_snapshot(path)
    assert header["time"] == 0.25 and header["signature"] == {"mu": 1, "epsilon": -1}
    np.testing.assert_array_equal(data["a"], a)
    np.testing.assert_array_equal(data["b"], b)
    with open(path, "ab") as fh:
        fh.write(b"\0")
    with pytest.raises(ShapeMismatch):
        read_snapshot(path)


def test_csv_round_trip(tmp_path):
    write_csv(tmp_path / "t.csv", ["x", "s"], [(0.1, "ok"), (1 / 3, "ok")])
    cols, rows = read_csv(tmp_path / "t.csv")
    assert cols == ["x", "s"] and float(rows[1][0]) == 1 / 3


def write_cfg(path, text):
    path.write_text("grid.n = 16\nsolver.T = 0.02\nsolver.dt = 0.01\noracle.dt = 0.001\n" + text)
    return str(path)


def test_cli_success_and_manifest(tmp_path):
    cfg = write_cfg(tmp_path / "a.cfg", "outputs.diagnostics = mass, accumulator, residuals, reconstruction\n")
    assert cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["exit_code"] == 0 and "mass.csv" in man["files"]
    assert any(k.startswith("snapshots/") for k in man["files"])


def test_cli_config_error(tmp_path):
    cfg = write_cfg(tmp_path / "bad.cfg", "nope = 3\n")
    assert cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert cli.run(["simulate", "--config", "demo:missing", "--out", str(tmp_path / "o")]) == 2


def test_cli_numeric_failure(tmp_path):
    # the explicit oracle step is far beyond its stability bound on 64^2
    cfg = tmp_path / "n.cfg"
    cfg.write_text("grid.n = 64\nsolver.T = 0.02\nsolver.dt = 0.01\noracle.dt = 0.01\n")
    cfg = str(cfg)
    out = tmp_path / "o"
    assert cli.run(["oracle-compare", "--config", cfg, "--out", str(out)]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 3 and "UnstableTimeStep" in man["status"]


def test_cli_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_cfg(tmp_path / "a.cfg", "")
    assert cli.run(["simulate", "--config", cfg, "--out", str(blocker / "sub")]) == 4
    assert cli.run(["simulate", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path / "o")]) == 4


def test_cli_is_deterministic(tmp_path):
    digests = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.run(["gauge-check", "--config", "demo:hyperbolic_gauge", "--out", str(out), "--seed", "7"]) == 0
        digests.append((out / "manifest.json").read_bytes())
    assert digests[0] == digests[1]
