import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fris.config import (ScenarioConfig, db_to_linear, dbm_to_watt, linear_to_db, square_factors,
                         watt_to_dbm)


@given(x=st.floats(1e-15, 1e15))
def test_db_round_trip(x):
    assert_allclose(db_to_linear(linear_to_db(x)), x, rtol=1e-12)
    assert_allclose(dbm_to_watt(watt_to_dbm(x)), x, rtol=1e-12)


def test_table_values():
    cfg = ScenarioConfig()
    assert_allclose(cfg.noise, 1e-14, rtol=1e-12)
    assert_allclose(cfg.p_tmax, 1.0, rtol=1e-12)
    assert_allclose(cfg.rho0, 1e-2, rtol=1e-12)
    assert_allclose(cfg.wavelength, 0.0599584916, rtol=1e-9)
    assert_allclose(cfg.eps, [1 / 3] * 3, rtol=1e-15)
    assert (cfg.M, cfg.K, cfg.N_t, cfg.I) == (16, 3, 4, 16)


def test_weights_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(K=2, weights=[0.5, 0.6])
    with pytest.raises(ValueError):
        ScenarioConfig(K=2, weights=[1.0])
    ScenarioConfig(K=2, weights=[0.25, 0.75])


@pytest.mark.parametrize("field", ["K", "N_t", "I", "M_y", "d_br", "max_outer", "beam_rounds"])
def test_positive_fields(field):
    with pytest.raises(ValueError):
        ScenarioConfig(**{field: 0})


def test_replace_M_and_K():
    cfg = ScenarioConfig().replace(M=25, K=2)
    assert (cfg.M_y, cfg.M_z, cfg.eps.tolist()) == (5, 5, [0.5, 0.5])
    assert square_factors(12) == (4, 3)
    assert square_factors(7) == (7, 1)


def test_json_and_toml_load(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"M": 9, "N_t": 2, "n_seeds": 3}))
    (tmp_path / "c.toml").write_text('M = 9\nN_t = 2\nn_seeds = 3\nL_bounds = [1, 2]\n'
                                     '[angles]\nue_los_theta = [95.0, 100.0]\n')
    a = ScenarioConfig.load(tmp_path / "c.json")
    b = ScenarioConfig.load(tmp_path / "c.toml")
    assert (a.M, a.N_t, a.seeds()) == (9, 2, [0, 1, 2])
    assert b.L_bounds == (1, 2) and b.angles["ue_los_theta"] == (95.0, 100.0)
    assert b.angles["ris_aoa_phi"] == (-90.0, -30.0)


def test_unknown_key():
    with pytest.raises(ValueError, match="unknown"):
        ScenarioConfig.from_dict({"M": 4, "bogus": 1})


def test_digest_is_stable():
    assert ScenarioConfig().digest() == ScenarioConfig().digest()
    assert ScenarioConfig().digest() != ScenarioConfig(N_t=5).digest()


def test_round_trip_dict():
    cfg = ScenarioConfig(M_y=3, weights=[0.2, 0.3, 0.5])
    again = ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert np.isclose(sum(again.weights), 1.0)
