import json

import pytest

from zenofrag.config import ConfigError, PRESETS, parse_config
from zenofrag.units import FS_TO_AU, PS_TO_AU


def parse(document):
    return parse_config(json.dumps(document))


def test_minimal_preset_resolves_with_defaults():
    config = parse({"system": {"preset": "vp2_default"}})
    assert config.system_kind == "vp_ladder"
    assert config.grid.n_points == 512
    assert config.propagation.dt == pytest.approx(0.1 * FS_TO_AU)
    assert config.propagation.t_end == pytest.approx(20.0 * PS_TO_AU)
    assert config.schedule is None  # preset only carries measurement defaults
    assert config.resolved["measurement"]["targets"] == ["v19"]
    assert config.build_system().labels == ("v20", "v19")


def test_all_presets_build():
    for name in PRESETS:
        config = parse({"system": {"preset": name}})
        system = config.build_system()
        assert system.n_channels >= 2


def test_user_overrides_preset():
    config = parse({
        "system": {"preset": "vp2_default"},
        "propagation": {"t_end_ps": 2.5},
        "output": {"directory": "elsewhere", "stride": 5},
    })
    assert config.propagation.t_end == pytest.approx(2.5 * PS_TO_AU)
    assert config.propagation.sample_stride == 5
    assert config.out_dir == "elsewhere"
    # untouched preset values survive
    assert config.resolved["propagation"]["cap"]["r_start_bohr"] == 17.0


def test_unknown_keys_rejected_with_path():
    with pytest.raises(ConfigError, match="grid.n_poins: unknown key"):
        parse({"system": {"preset": "vp2_default"}, "grid": {"n_poins": 256}})
    with pytest.raises(ConfigError, match="system.params.vdw"):
        parse({"system": {
            "kind": "vp_ladder", "reduced_mass_amu": 5.0,
            "params": {"fast": {"well_depth_cm1": 1.0, "steepness_inv_bohr": 1.0,
                                "mass_amu": 1.0},
                       "vdw": {"well_depth_cm1": 1.0, "steepness_inv_bohr": 1.0,
                               "r_eq_bohr": 1.0, "typo": 2},
                       "n_channels": 2, "v_top": 5,
                       "coupling": {"strength_at_r_eq_cm1": 1.0,
                                    "range_inv_bohr": 1.0}}}})


def test_missing_required_keys_rejected():
    with pytest.raises(ConfigError, match="system"):
        parse({})
    with pytest.raises(ConfigError, match="reduced_mass_amu"):
        parse({"system": {"kind": "vp_ladder", "params": {}}})


def test_tau_zero_rejected():
    with pytest.raises(ConfigError, match="tau must be positive"):
        parse({"system": {"preset": "vp2_default"},
               "measurement": {"kind": "depletion", "tau_fs": 0}})


def test_tau_divisibility():
    config = parse({"system": {"preset": "vp2_default"},
                    "measurement": {"kind": "depletion", "tau_fs": 5.0}})
    assert round(config.schedule.tau / config.propagation.dt) == 50
    with pytest.raises(ConfigError, match="integer multiple"):
        parse({"system": {"preset": "vp2_default"},
               "measurement": {"kind": "depletion", "tau_fs": 0.25}})


def test_tau_list_parsed_and_checked():
    config = parse({"system": {"preset": "vp2_default"},
                    "measurement": {"kind": "depletion", "tau_list_fs": [5, 10]}})
    assert config.tau_list == pytest.approx((5 * FS_TO_AU, 10 * FS_TO_AU))
    with pytest.raises(ConfigError, match="tau_list_fs"):
        parse({"system": {"preset": "vp2_default"},
               "measurement": {"kind": "depletion", "tau_list_fs": [5, -1]}})


def test_explicit_null_measurement_disables_preset_block():
    config = parse({"system": {"preset": "vp2_default"}, "measurement": None})
    assert config.schedule is None
    assert config.resolved["measurement"] is None


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="unknown preset"):
        parse({"system": {"preset": "vp9"}})


def test_bad_grid_rejected():
    with pytest.raises(ConfigError, match="grid"):
        parse({"system": {"preset": "vp2_default"}, "grid": {"n_points": 500,
               "r_min_bohr": 3.0, "r_max_bohr": 26.0}})


def test_invalid_json_rejected():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config("{nope")


def test_fit_window_validation():
    config = parse({"system": {"preset": "vp2_default"},
                    "analysis": {"fit_window_ps": [1.0, 4.0]}})
    assert config.fit_window == pytest.approx((1.0 * PS_TO_AU, 4.0 * PS_TO_AU))
    with pytest.raises(ConfigError, match="fit_window"):
        parse({"system": {"preset": "vp2_default"},
               "analysis": {"fit_window_ps": [4.0, 1.0]}})


def test_with_overrides_round_trip():
    config = parse({"system": {"preset": "vp2_default"},
                    "measurement": {"kind": "depletion", "tau_fs": 5.0}})
    derived = config.with_overrides(out_dir="other", seed=99, tau=10 * FS_TO_AU)
    assert derived.out_dir == "other"
    assert derived.schedule.seed == 99
    assert derived.schedule.tau == pytest.approx(10 * FS_TO_AU)
    free = config.with_overrides(measurement_off=True)
    assert free.schedule is None
