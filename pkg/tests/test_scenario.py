import json
import math

import pytest

from levosc.isolation import CRYOSTAT_STAGES
from levosc.physics import Sphere, mass_of
from levosc.scenario import (
    ConfigError,
    bundled_configs,
    canonical_json,
    load_scenario,
    parse_scenario,
    scenario_digest,
)

MINIMAL = {
    "sphere": {"diameter_m": 9.8e-6, "density_kg_m3": 1100},
    "mode": {"label": "mode1", "f0_hz": 11.7, "gamma_over_2pi_hz": 5.9e-7},
    "environment": {"temperature_k": 3.0},
    "simulation": {"duration_s": 100.0},
}


def _with(**sections):
    data = json.loads(json.dumps(MINIMAL))
    data.update(sections)
    return {k: v for k, v in data.items() if v is not None}


def test_minimal_scenario():
    sc = parse_scenario(MINIMAL)
    assert sc.mass == pytest.approx(mass_of(Sphere(9.8e-6)))
    assert sc.mode().label == "mode1"
    assert sc.mode().mode.gamma == pytest.approx(2 * math.pi * 5.9e-7)
    cfg = sc.sim_config()
    assert cfg.duration == 100.0 and cfg.rng_seed == 0
    assert sc.feedback_config() is None
    assert sc.isolation is None and sc.sweep is None and sc.spin is None
    assert len(sc.digest) == 16


def test_every_bundled_config_parses():
    names = bundled_configs()
    assert {"mode1_ringdown.cfg", "mode2_8p4hz.cfg", "mode2_8p7hz.cfg", "isolation.cfg", "spin.cfg"} <= set(names)
    for name in names:
        sc = load_scenario(name)
        assert sc.name == name[:-4]


def test_gamma_scale_and_override():
    sc = load_scenario("mode1_ringdown")
    assert sc.mode().mode.gamma_over_2pi == pytest.approx(5.9e-4)
    sc2 = load_scenario("mode1_ringdown", scale_gamma=10)
    assert sc2.mode().mode.gamma_over_2pi == pytest.approx(5.9e-3)
    assert sc2.digest != sc.digest


def test_seed_override_folds_into_digest():
    a = load_scenario("mode1_ringdown", seed=7)
    b = load_scenario("mode1_ringdown", seed=7)
    c = load_scenario("mode1_ringdown", seed=8)
    assert a.digest == b.digest != c.digest
    assert a.sim_config().rng_seed == 7
    # a scenario without a simulation section is unaffected by --seed
    assert load_scenario("isolation", seed=7).simulation is None


def test_digest_is_key_order_independent():
    shuffled = dict(reversed(list(MINIMAL.items())))
    assert scenario_digest(shuffled) == scenario_digest(MINIMAL)
    assert canonical_json(MINIMAL).startswith('{"environment"')


@pytest.mark.parametrize("data,field", [
    (_with(sphere={"density_kg_m3": 1100}), "sphere.mass_kg"),
    (_with(sphere={"diameter_m": 9.8e-6, "diameter_um": 9.8}), "sphere.diameter_um"),
    (_with(mode={"f0_hz": -1.0}), "mode.f0_hz"),
    (_with(mode={"f0": 11.7}), "mode.f0"),
    (_with(environment={"temperature_k": "cold"}), "environment.temperature_k"),
    (_with(simulation={"duration_s": 1.0, "seed": 1.5}), "simulation.seed"),
    (_with(feedback={"mode": "heat"}), "feedback.mode"),
    (_with(feedback={"mode": "cool", "gain_n": 1.0}), "feedback.gain_n"),
    (_with(isolation={"stages": []}), "isolation.stages"),
    (_with(isolation={"stages": [{"load_mass_kg": 1.0}]}), "isolation.stages[0].char_frequency_hz"),
    (_with(sweep={"start": 1.0, "stop": 1.0}), "sweep"),
    (_with(sweep={"points": 0}), "sweep"),
    (_with(sweep={"temperatures_k": []}), "sweep.temperatures_k"),
    (_with(spin={"species": "muon"}), "spin.species"),
    (_with(colour="blue"), "colour"),
])
def test_validation_names_the_field(data, field):
    with pytest.raises(ConfigError) as err:
        parse_scenario(data)
    assert str(err.value).startswith(field)


def test_missing_mass_only_fails_when_needed():
    data = {k: v for k, v in MINIMAL.items() if k != "sphere"}
    sc = parse_scenario(data)
    with pytest.raises(ConfigError, match="mass_kg"):
        sc.sim_config()


def test_mass_or_diameter():
    sc = parse_scenario(_with(sphere={"mass_kg": 1e-12}))
    assert sc.mass == 1e-12 and sc.sphere is None
    with pytest.raises(ConfigError, match="not both"):
        parse_scenario(_with(sphere={"mass_kg": 1e-12, "diameter_m": 1e-5}))


def test_multiple_modes_and_lookup():
    sc = parse_scenario(_with(mode=None, modes=[{"label": "a", "f0_hz": 11.7}, {"label": "b", "f0_hz": 8.4}]))
    assert sc.mode("b").mode.f0 == 8.4
    with pytest.raises(ConfigError, match="no mode labelled"):
        sc.mode("c")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_scenario(_with(mode=None, modes=[{"label": "a", "f0_hz": 1.0}, {"label": "a", "f0_hz": 2.0}]))


def test_feedback_gain_units():
    cool = parse_scenario(_with(feedback={"mode": "cool", "gain_n_s_per_m": 1e-14})).feedback_config()
    assert cool.mode == "cool" and cool.gain == 1e-14 and cool.carrier_f == 11.7
    excite = parse_scenario(_with(feedback={"mode": "excite", "gain_n": 1e-18})).feedback_config()
    assert excite.gain == 1e-18 and math.isinf(excite.coil_force_limit)


def test_isolation_defaults_to_cryostat_stages():
    sc = parse_scenario(_with(isolation={}))
    assert sc.isolation["stages"] == CRYOSTAT_STAGES
    assert sc.isolation["frequency_hz"] == 8.0


def test_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text('{\n  "sphere": {"mass_kg": 1e-12,}\n}\n')
    with pytest.raises(ConfigError, match="line 2"):
        load_scenario(bad)
    with pytest.raises(ConfigError, match="not found"):
        load_scenario(tmp_path / "nope.cfg")
    arr = tmp_path / "arr.cfg"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_scenario(arr)
    with pytest.raises(ConfigError, match="scale-gamma"):
        load_scenario("mode1_ringdown", scale_gamma=-1.0)
    with pytest.raises(ConfigError, match="seed"):
        load_scenario("mode1_ringdown", seed=2**64)
