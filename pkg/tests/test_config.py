import pytest
import yaml

from ris_cellfree.config import (
    ConfigError,
    ExperimentSpec,
    OptimizerConfig,
    SystemConfig,
    desk_profile,
    dump_spec,
    load_spec,
    spec_from_dict,
    spec_to_dict,
)


def test_defaults_match_setup():
    cfg = SystemConfig()
    assert (cfg.num_aps, cfg.num_users, cfg.pilot_len, cfg.bandwidth_mhz, cfg.noise_power_dbm) == (100, 10, 5, 20.0, -92.0)
    assert cfg.weights == (1.0,) * 10
    opt = OptimizerConfig()
    assert (opt.pop_size, opt.max_generations, opt.lambda_window, opt.shade_memory_size, opt.lambda_init) == (50, 500, 20, 10, 0.5)


def test_snr_conversion():
    cfg = SystemConfig(noise_power_dbm=-92.0, uplink_power_mw=100.0)
    assert cfg.noise_mw == pytest.approx(10 ** -9.2)
    assert cfg.rho == pytest.approx(100.0 / 10 ** -9.2)


def test_prelog():
    assert SystemConfig(pilot_len=5, coherence_len=200, bandwidth_mhz=20.0).prelog == pytest.approx(19.5)


def test_desk_profile():
    spec = desk_profile()
    s = spec.system
    assert (s.num_aps, s.num_users, s.num_ris_elements, s.pilot_len) == (20, 5, 32, 3)
    assert spec.num_topologies == 20


@pytest.mark.parametrize(
    "cls, kwargs",
    [
        (SystemConfig, {"num_aps": 0}),
        (SystemConfig, {"pilot_len": 300}),
        (SystemConfig, {"blockage_prob": 1.5}),
        (SystemConfig, {"user_weights": (1.0,)}),
        (SystemConfig, {"uplink_power_mw": 0.0}),
        (OptimizerConfig, {"pop_size": 3}),
        (OptimizerConfig, {"pbest_fraction": 0.0}),
        (OptimizerConfig, {"algorithm": "pso"}),
        (OptimizerConfig, {"lambda_window": 0}),
        (ExperimentSpec, {"num_topologies": 0}),
        (ExperimentSpec, {"algorithms": ("ide", "pso")}),
        (ExperimentSpec, {"sweep": ("not_a_field", (1,))}),
        (ExperimentSpec, {"sweep": ("blockage_prob", ())}),
    ],
)
def test_rejects_invalid(cls, kwargs):
    with pytest.raises(ConfigError):
        cls(**kwargs)


def test_yaml_roundtrip(tmp_path):
    spec = desk_profile().replace(sweep=("blockage_prob", (0.0, 0.5, 1.0)), master_seed=7)
    path = tmp_path / "c.yaml"
    path.write_text(dump_spec(spec))
    assert load_spec(path) == spec


def test_partial_file_uses_defaults(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"system": {"num_aps": 7}, "experiment": {"algorithms": ["ide"]}}))
    spec = load_spec(path)
    assert spec.system.num_aps == 7 and spec.system.num_users == 10
    assert spec.algorithms == ("ide",)


def test_tuple_fields_roundtrip():
    spec = ExperimentSpec(system=SystemConfig(num_users=2, user_weights=(1.0, 2.0)))
    assert spec_from_dict(spec_to_dict(spec)) == spec


@pytest.mark.parametrize("data", [{"bogus": {}}, {"system": {"bogus": 1}}, {"experiment": {"bogus": 1}}])
def test_unknown_keys(data):
    with pytest.raises(ConfigError):
        spec_from_dict(data)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_spec(tmp_path / "nope.yaml")


def test_shipped_configs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.yaml"))
    assert files
    for path in files:
        load_spec(path)
    assert load_spec(root / "desk.yaml") == desk_profile()
