import json
import math

import numpy as np
import pytest

from qbattery import states as S
from qbattery.config import ConfigError, SimConfig, apply_overrides, parse_override


def test_defaults():
    cfg = SimConfig.from_dict()
    assert cfg.charger == S.Fock(7)
    assert cfg.g1 == cfg.g2 == 1.0
    assert cfg.frame == "interaction"
    assert cfg.n_max == "auto"
    assert cfg.horizon == 2 * math.pi
    assert cfg.times.size == 2001 and cfg.times[-1] == 2 * math.pi
    assert cfg.gamma == 0
    assert cfg.output == {"format": "csv", "plot": "none", "path": None}
    assert cfg.n_values == list(range(1, 11))
    np.testing.assert_allclose(cfg.n_th_values, np.geomspace(1e-3, 100, 40))
    np.testing.assert_allclose(cfg.gamma_values, np.geomspace(1e-3, 100, 40))


@pytest.mark.parametrize("doc", [
    {"gamma": -0.1},
    {"grid_points": 1},
    {"frame": "rotating"},
    {"n_max": "big"},
    {"n_max": 0},
    {"charger": {"kind": "cat"}},
    {"charger": {"kind": "fock", "nbar": 3}},
    {"charger": {"kind": "coherent", "mean": 7, "alpha": 1}},
    {"unknown": 1},
    {"output": {"format": "xml"}},
    {"n_range": [5, 2]},
    {"horizon": 0},
])
def test_schema_violations(doc):
    with pytest.raises(ConfigError):
        SimConfig.from_dict(doc)


def test_non_finite_numbers_rejected():
    with pytest.raises(ConfigError):
        SimConfig.from_json('{"g1": NaN}')
    with pytest.raises(ConfigError):
        SimConfig.from_json('{"horizon": Infinity}')
    with pytest.raises(ConfigError):
        SimConfig.from_json("{not json")


def test_overrides():
    assert parse_override("gamma=0.5") == (["gamma"], 0.5)
    assert parse_override("frame=lab") == (["frame"], "lab")
    assert parse_override("charger.alpha=[1, 2]") == (["charger", "alpha"], [1, 2])
    with pytest.raises(ConfigError):
        parse_override("gamma")
    doc = apply_overrides({"output": {"format": "csv"}}, ["output.plot=svg"])
    assert doc == {"output": {"format": "csv", "plot": "svg"}}


def test_charger_resolution():
    cfg = SimConfig.from_dict({}, ["charger.n=3"])
    assert cfg.charger == S.Fock(3)
    cfg = SimConfig.from_dict({"charger": {"kind": "coherent", "alpha": [1.0, -0.5]}})
    assert cfg.charger == S.Coherent(1 - 0.5j)
    cfg = SimConfig.from_dict({"charger": {"kind": "squeezed", "mean": 7}})
    assert cfg.charger.r == pytest.approx(math.asinh(math.sqrt(7)))
    cfg = SimConfig.from_dict({}, ["charger.kind=thermalized_fock", "charger.n=7", "charger.n_th=0.5"])
    assert cfg.charger == S.ThermalizedFock(7, 0.5)


def test_explicit_grids():
    cfg = SimConfig.from_dict({"n_th_grid": [0.0, 1.0], "gamma_grid": {"min": 0.1, "max": 10, "points": 3}})
    np.testing.assert_allclose(cfg.n_th_values, [0, 1])
    np.testing.assert_allclose(cfg.gamma_values, [0.1, 1, 10])


def test_round_trip_and_replace():
    cfg = SimConfig.from_dict({"gamma": 0.2, "charger": {"kind": "thermal", "nbar": 3}})
    again = SimConfig.from_json(cfg.to_json())
    assert again.doc == cfg.doc
    other = cfg.replace(charger=S.Fock(2), gamma=0.0)
    assert other.charger == S.Fock(2) and other.gamma == 0.0 and cfg.gamma == 0.2
    json.loads(other.to_json())
