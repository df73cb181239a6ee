"""
Command Line
============

Every subcommand writes its tables atomically with a provenance header, maps
failures to exit codes (2 configuration/model, 3 standing assumption,
4 numerical) and writes nothing when it fails.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from config import config  # noqa: E402
from core.metadata import REQUIRED_FIELDS, read_csv_metadata, read_csv_rows  # noqa: E402
from main import EXIT_ASSUMPTION, EXIT_CONFIG, EXIT_OK, main  # noqa: E402


@pytest.fixture(autouse=True)
def restore_defaults():
    saved = (config.solver, config.grids, config.simulation)
    yield
    config.solver, config.grids, config.simulation = saved


def run_cli(command, fixture_path, name, out, *extra):
    return main([command, "--config", str(fixture_path(name)), "--out", str(out), *extra])


def column(rows, key):
    return np.array([float(r[key]) for r in rows])


class TestSteady:
    def test_writes_document(self, fixture_path, tmp_path):
        assert run_cli("steady", fixture_path, "two_chain.json", tmp_path) == EXIT_OK
        payload = json.loads((tmp_path / "steady.json").read_text(encoding="utf-8"))
        for field in REQUIRED_FIELDS:
            assert field in payload["metadata"]
        assert payload["controllability_rank"] == 4
        assert payload["ep"] == pytest.approx(2.0 / 9.0, rel=1e-9)
        assert payload["ep_noise"] == pytest.approx(payload["ep"], rel=1e-9)
        assert payload["ep_sigma"] == pytest.approx(payload["ep"], rel=1e-9)
        assert payload["ep_positivity_pairs"] == [[1.0, 3.0]]
        assert payload["structure"]["passed"]

    def test_uncontrollable_network(self, fixture_path, tmp_path):
        code = run_cli("steady", fixture_path, "uncontrollable.json", tmp_path)
        assert code == EXIT_ASSUMPTION
        assert list(tmp_path.iterdir()) == []


class TestCgf:
    def test_symmetric_chain_saturates_bound(self, fixture_path, tmp_path):
        code = run_cli("cgf", fixture_path, "symmetric_two_chain.json", tmp_path)
        assert code == EXIT_OK
        header = read_csv_metadata(tmp_path / "cgf.csv")
        assert abs(float(header["kappa_c"]) - 1.0) <= 1e-6
        assert float(header["kappa_0"]) == pytest.approx(1.0)

    def test_table(self, fixture_path, tmp_path):
        assert run_cli("cgf", fixture_path, "two_chain.json", tmp_path) == EXIT_OK
        path = tmp_path / "cgf.csv"
        header = read_csv_metadata(path)
        assert float(header["kappa_c"]) > float(header["kappa_0"]) + 1e-3
        assert float(header["ep"]) == pytest.approx(2.0 / 9.0, rel=1e-9)
        rows = read_csv_rows(path)
        assert len(rows) == 9
        alpha = column(rows, "alpha")
        kappa_c = float(header["kappa_c"])
        assert alpha[0] == pytest.approx(0.5 - kappa_c, abs=1e-6)
        assert alpha[-1] == pytest.approx(0.5 + kappa_c, abs=1e-6)
        assert rows[0]["e_prime"] == "-inf"
        assert rows[-1]["e_prime"] == "inf"

    def test_output_is_reproducible(self, fixture_path, tmp_path):
        run_cli("cgf", fixture_path, "two_chain.json", tmp_path / "a")
        run_cli("cgf", fixture_path, "two_chain.json", tmp_path / "b", "--threads", "2")
        first = (tmp_path / "a" / "cgf.csv").read_bytes()
        second = (tmp_path / "b" / "cgf.csv").read_bytes()
        assert first == second

    def test_json_format(self, fixture_path, tmp_path):
        code = run_cli("cgf", fixture_path, "two_chain.json", tmp_path, "--format", "json")
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "cgf.json").read_text(encoding="utf-8"))
        assert payload["columns"] == ["alpha", "e_integral", "e_spectral", "e_prime"]


class TestRate:
    def test_equilibrium_dissipation(self, fixture_path, tmp_path):
        assert run_cli("rate", fixture_path, "equilibrium_chain.json", tmp_path) == EXIT_OK
        path = tmp_path / "rate.csv"
        header = read_csv_metadata(path)
        assert header["degenerate"] == "true"
        assert header["kappa_c"] == "inf"
        rows = read_csv_rows(path)
        s = column(rows, "s")
        assert np.allclose(column(rows, "J"), np.abs(s), atol=1e-6)

    def test_non_equilibrium_header(self, fixture_path, tmp_path):
        assert run_cli("rate", fixture_path, "two_chain.json", tmp_path) == EXIT_OK
        header = read_csv_metadata(tmp_path / "rate.csv")
        assert header["functional"] == "tde_steady"
        assert float(header["alpha_plus"]) == pytest.approx(1.0, abs=1e-6)
        assert float(header["eta_minus"]) < float(header["ep"]) < float(header["eta_plus"])
        assert float(header["eta_minus"]) == pytest.approx(-float(header["ep"]), abs=1e-6)
        assert header["degenerate"] == "false"


class TestSimulate:
    def test_requires_seed(self, fixture_path, tmp_path):
        assert run_cli("simulate", fixture_path, "two_chain.json", tmp_path) == EXIT_CONFIG
        assert not tmp_path.exists() or list(tmp_path.iterdir()) == []

    def test_outputs(self, fixture_path, tmp_path):
        code = run_cli("simulate", fixture_path, "two_chain.json", tmp_path, "--seed", "7")
        assert code == EXIT_OK
        header = read_csv_metadata(tmp_path / "sim.csv")
        assert header["seed"] == "7"
        rows = read_csv_rows(tmp_path / "sim.csv")
        assert [float(r["alpha"]) for r in rows] == [0.0, 0.25, 0.5]
        assert float(rows[0]["e_t"]) == 0.0
        assert all(math.isfinite(float(r["oracle"])) for r in rows)
        jarzynski = json.loads((tmp_path / "jarzynski.json").read_text(encoding="utf-8"))
        assert jarzynski["n_traj"] == 64
        assert jarzynski["metadata"]["command"] == "simulate"
        assert isinstance(jarzynski["clt_normal"], bool)
        assert jarzynski["clt_statistic"] >= 0.0


class TestScan:
    def test_triangular(self, fixture_path, tmp_path):
        assert run_cli("scan", fixture_path, "triangular_scan.json", tmp_path) == EXIT_OK
        rows = read_csv_rows(tmp_path / "scan.csv")
        assert len(rows) == 2
        assert float(rows[0]["u"]) == 0.0
        assert float(rows[0]["inverse_kappa_c"]) == 0.0
        assert float(rows[1]["inverse_kappa_c"]) > 0.0

    def test_chain(self, fixture_path, tmp_path):
        assert run_cli("scan", fixture_path, "symmetric_two_chain.json", tmp_path) == EXIT_OK
        rows = read_csv_rows(tmp_path / "scan.csv")
        assert [float(r["delta"]) for r in rows] == [0.0, 0.5]
        assert float(rows[0]["ratio"]) == pytest.approx(1.0, rel=1e-6)
        assert float(rows[1]["ratio"]) >= 1.0 - 1e-8

    def test_explicit_network_rejected(self, fixture_path, tmp_path):
        assert run_cli("scan", fixture_path, "uncontrollable.json", tmp_path) == EXIT_CONFIG


class TestErrors:
    def test_missing_config(self, tmp_path):
        code = main(["steady", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG

    def test_bad_thread_environment(self, fixture_path, tmp_path, monkeypatch):
        monkeypatch.setenv("FLUCTNET_THREADS", "many")
        assert run_cli("steady", fixture_path, "two_chain.json", tmp_path) == EXIT_CONFIG
