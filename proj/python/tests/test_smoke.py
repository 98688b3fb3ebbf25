import math

import numpy as np
import pytest

import swarmlfa as sl


def test_parse_and_split():
    m, users, items, dups = sl.parse_ratings("a::x::5\nb::x::3\na::y::1\na::x::4\n")
    assert (m.user_count, m.item_count, len(m), dups) == (2, 2, 3, 1)
    assert users == ["a", "b"] and items == ["x", "y"]
    assert m.row(0) == [(0, 4.0), (1, 1.0)]
    s = sl.split(sl.generate_synthetic(seed=2), (0.7, 0.1, 0.2), 2)
    assert (len(s.train), len(s.validation), len(s.test)) == (2100, 300, 600)


def test_parse_error_is_value_error():
    with pytest.raises(sl.InputError, match="line 2"):
        sl.parse_ratings("1::2::3\n1::2\n")
    assert issubclass(sl.InputError, ValueError)


def test_arrays_round_trip():
    m = sl.HdiMatrix.from_arrays(3, 4, np.array([0, 2]), np.array([1, 3]), np.array([2.5, 4.0]))
    u, i, r = m.to_arrays()
    assert list(u) == [0, 2] and list(i) == [1, 3] and list(r) == [2.5, 4.0]
    assert m.density == pytest.approx(2 / 12)


def test_model_views_and_gradient():
    model = sl.FactorModel(1, 1, 1)
    model.P[0, 0] = 1.0
    model.Q[0, 0] = 2.0
    assert model.predict(0, 0) == 2.0
    g = sl.entry_gradient(model, 0, 0, 3.0, 0.1)
    assert g["p"][0] == pytest.approx(-2 + 0.1)
    assert g["q"][0] == pytest.approx(-1 + 0.2)
    back = sl.load_model(sl.save_model(model))
    assert back == model


def test_metrics():
    assert sl.rmse_of_residuals([1, 2, 2, 1, 2, 2]) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert sl.mae_of_residuals([1, -1]) == 1.0
    with pytest.raises(sl.InputError):
        sl.rmse_of_residuals([])


def test_schedule_endpoints():
    b = sl.ScheduleBounds()
    assert sl.schedule_coefficients(0, b) == (b.omega_max, b.gamma_max, b.gamma_min)
    assert sl.schedule_coefficients(b.G, b) == (b.omega_min, b.gamma_min, b.gamma_max)
    with pytest.raises(sl.ConfigError):
        sl.schedule_coefficients(b.G + 1, b)


def test_pretrain_then_refine():
    s = sl.split(sl.generate_synthetic(seed=1), (0.7, 0.1, 0.2), 1)
    cfg = sl.SgdConfig()
    cfg.lam = 0.03
    pre, report = sl.pretrain(sl.init_model(200, 300, 5, 1), s, cfg, 1)
    assert not report.failed and report.history
    rc = sl.RefineConfig()
    rc.lam = 0.1
    rc.stall_iterations = 5
    rc.gamma3 = 0.25
    rc.schedule.omega_max = 0.7
    refined, rr = sl.refine_model(pre, s, rc)
    again, _ = sl.refine_model(pre, s, rc, threads=2)
    assert refined == again
    assert sl.rmse(refined, s.test) <= sl.rmse(pre, s.test)
    assert sl.RefineConfig.from_text(rc.to_text()).to_text() == rc.to_text()
    assert sl.hpl_baseline(rc).update_rule == sl.UpdateRule.STANDARD


def test_bad_config():
    rc = sl.RefineConfig()
    rc.K = 2
    with pytest.raises(sl.ConfigError):
        rc.validate()
