"""Run configuration parsing and validation."""

import json
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from config import ConfigError, FunctionalTag, NetworkPreset, RunConfig, config, load_config  # noqa: E402


def test_singleton_defaults_are_valid():
    assert config.validate() == []
    assert "FluctNet Configuration Summary" in config.summary()


def test_fixtures_are_valid(fixture_path):
    for name in ("two_chain.json", "symmetric_two_chain.json", "equilibrium_chain.json", "triangular_scan.json"):
        run = load_config(fixture_path(name))
        assert run.validate() == [], name


def test_drive_expansion(fixture_path):
    run = load_config(fixture_path("equilibrium_chain.json"))
    chain = run.network.chain
    assert chain.b == [2.0, 2.0]
    assert chain.gammas == (1.0, 1.0)
    assert chain.thetas == (2.0, 2.0)
    assert chain.gamma_bar == pytest.approx(1.0)


def test_enums_and_tuples_coerced(fixture_path):
    run = load_config(fixture_path("two_chain.json"))
    assert run.functional is FunctionalTag.TDE_STEADY
    assert run.network.preset is NetworkPreset.CHAIN
    assert isinstance(run.network.chain.thetas, tuple)


def test_round_trip_through_dict(fixture_path):
    run = load_config(fixture_path("two_chain.json"))
    again = RunConfig.from_dict(json.loads(json.dumps(run.to_dict())))
    assert again.to_dict() == run.to_dict()


class TestRejectedConfigurations:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            RunConfig.from_dict({"networks": {}})

    def test_bad_enum(self):
        with pytest.raises(ConfigError, match="not one of"):
            RunConfig.from_dict({"functional": "heat"})

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="expected an integer"):
            RunConfig.from_dict({"threads": 1.5})

    def test_drive_and_sites_together(self):
        data = {"network": {"chain": {"drive": {"length": 2}, "b": [1.0, 1.0]}}}
        with pytest.raises(ConfigError, match="either"):
            RunConfig.from_dict(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)


class TestValidation:
    def test_seed_required_to_simulate(self):
        run = RunConfig()
        assert any("seed" in err for err in run.validate(command="simulate"))
        run.simulation.seed = 3
        assert run.validate(command="simulate") == []

    def test_alphas_outside_safe_band(self):
        run = RunConfig()
        run.simulation.alphas = [0.0, 1.5]
        assert any("safe band" in err for err in run.validate())

    def test_canonical_transient_needs_covariance(self):
        run = RunConfig(functional=FunctionalTag.CANONICAL_TRANSIENT)
        assert any("initial_cov" in err for err in run.validate())

    def test_coupling_count(self):
        run = RunConfig()
        run.network.chain.a = []
        assert any("couplings" in err for err in run.validate())


def test_digest_ignores_placement():
    first, second = RunConfig(), RunConfig()
    second.output.directory = "elsewhere"
    second.threads = 8
    assert first.digest_payload() == second.digest_payload()
    second.network.chain.thetas = (1.0, 4.0)
    assert first.digest_payload() != second.digest_payload()
