import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bns_lrm.model import (
    PRESETS,
    AssumptionError,
    GammaOUParams,
    IGOUParams,
    MarketState,
    ModelError,
    alpha_drift,
    bcal,
    bound_constants,
    c_rho,
    c_rho_quadrature,
    check_variance_floor,
    jump_compensator,
    martingale_drift,
    model_constants,
    params_from_dict,
    preset,
    validate_assumptions,
)


def test_bcal_values():
    assert bcal(0.0, 0.5783) == 0.0
    assert bcal(1.0, 0.5783) == pytest.approx(0.7593, abs=1e-4)
    assert bcal(math.inf, 2.0) == 0.5
    assert np.allclose(bcal(np.array([0.0, 1.0]), 1.0), [0.0, 1 - math.exp(-1)])


def test_bcal_rejects_bad_input():
    with pytest.raises(ModelError):
        bcal(-1.0, 1.0)
    with pytest.raises(ModelError):
        bcal(1.0, 0.0)


@given(st.floats(0.01, 10), st.floats(0.0, 5), st.floats(0.001, 5))
def test_bcal_increasing_concave_bounded(lam, tau, h):
    b0, b1, b2 = bcal(tau, lam), bcal(tau + h, lam), bcal(tau + 2 * h, lam)
    assert b0 <= b1 <= 1 / lam + 1e-15
    assert b1 - b0 >= b2 - b1 - 1e-14
    assert b0 <= tau + 1e-15


def test_c_rho_examples(scho):
    assert c_rho(GammaOUParams(1.4338, 11.6641, 0.5783, 0.0, 0.0145)) == 0.0
    assert c_rho(scho) == pytest.approx(0.01438, rel=1e-3)
    assert c_rho(GammaOUParams(1.0, 1.0, 1.0, -1.0, 0.01)) == pytest.approx(1 / 3, rel=1e-14)


def test_c_rho_quadrature_matches_closed_form(scho):
    assert c_rho_quadrature(scho) == pytest.approx(c_rho(scho), rel=1e-10)


def test_c_rho_ig_positive():
    assert c_rho(PRESETS["NV-IG"]) > 0


def test_martingale_drift_examples(scho):
    rho0 = GammaOUParams(1.0, 2.0, 1.0, 0.0, 0.01)
    assert martingale_drift(rho0, 0.03, 0.01) == pytest.approx(0.02, abs=1e-15)
    assert martingale_drift(scho, 0.019, 0.012) == pytest.approx(0.08787, abs=1e-5)
    assert martingale_drift(rho0, 0.02, 0.02) == 0.0


def test_alpha_drift_examples(scho):
    assert alpha_drift(scho, martingale_drift(scho, 0.019, 0.012)) == pytest.approx(0.007, abs=1e-12)
    assert alpha_drift(GammaOUParams(1.0, 2.0, 1.0, 0.0, 0.01), 0.05) == 0.05
    assert alpha_drift(GammaOUParams(1.0, 2.0, 1.0, -1.0, 0.01), 0.0) == pytest.approx(-1 / 3)


def test_ig_compensator_finite():
    assert jump_compensator(PRESETS["Scho-IG"]) < 0


def test_validate_presets():
    passed = {n: validate_assumptions(p, 1.0, martingale_drift(p, 0.019, 0.012)).ok
              for n, p in PRESETS.items()}
    assert passed == {"NV-IG": True, "Scho-IG": False, "NV-Gamma": True, "Scho-Gamma": True}
    p = PRESETS["Scho-IG"]
    rep = validate_assumptions(p, 1.0, martingale_drift(p, 0.019, 0.012))
    assert [c.name for c in rep.failures] == ["exponential_moment"]


def test_validate_rho_zero_margin_one():
    p = GammaOUParams(1.0, 5.0, 1.0, 0.0, 0.01)
    rep = validate_assumptions(p, 1.0, 0.0)
    assert rep.ok
    assert rep.checks[1].margin == pytest.approx(1.0)


def test_require_raises_and_force():
    rep = validate_assumptions(PRESETS["Scho-IG"], 1.0, 0.0)
    with pytest.raises(AssumptionError):
        rep.require()
    rep.require(force=True)


def test_bound_constants_examples(scho):
    c_u, c_th, _ = bound_constants(scho, 1.0, 0.0)
    assert (c_u, c_th) == (0.0, 1.0)
    c_u, c_th, c_hat = bound_constants(scho, 1.0, 0.007)
    assert 0 < c_u < math.inf and 0 < c_th < math.inf and c_hat >= 1
    small = [bound_constants(GammaOUParams(1.4338, 11.6641, 0.5783, -r, 0.0145), 1.0, 0.007)
             for r in (1e-1, 1e-3, 1e-5)]
    assert small[0][0] < small[1][0] < small[2][0]
    assert small[2][1] > 1e4


def test_bound_constants_reject_drift_ratio(scho):
    with pytest.raises(AssumptionError):
        bound_constants(scho, 1.0, -1.0)


def test_model_constants(scho):
    mc = model_constants(scho, 1.0, martingale_drift(scho, 0.019, 0.012))
    assert mc.alpha_drift == pytest.approx(0.007)
    assert mc.theta_hat == scho.b
    assert mc.bcal_T == pytest.approx(bcal(1.0, scho.lam))


def test_params_validation():
    with pytest.raises(ModelError):
        GammaOUParams(1.0, 1.0, 1.0, 0.5, 0.01)
    with pytest.raises(ModelError):
        GammaOUParams(-1.0, 1.0, 1.0, -0.5, 0.01)
    with pytest.raises(ModelError):
        preset("nope")


def test_params_from_dict():
    p = params_from_dict({"preset": "Scho-Gamma", "rho": 0.0})
    assert p.rho == 0.0 and p.b == 11.6641
    full = params_from_dict(PRESETS["NV-IG"].to_dict())
    assert full == PRESETS["NV-IG"]
    with pytest.raises(ModelError):
        params_from_dict({"preset": "Scho-Gamma", "model": "ig-ou"})
    with pytest.raises(ModelError):
        params_from_dict({"preset": "Scho-Gamma", "bogus": 1})
    with pytest.raises(ModelError):
        params_from_dict({"model": "gamma-ou", "a": 1.0})


def test_market_state():
    s = MarketState(100.0, 0.02, 0.25, 1.0, 0.05, 0.01)
    assert s.tau == 0.75
    assert s.discount == pytest.approx(math.exp(-0.04 * 0.75))
    assert MarketState.from_dict(s.to_dict()) == s
    with pytest.raises(ModelError):
        MarketState(100.0, 0.02, 1.5, 1.0)
    with pytest.raises(ModelError):
        MarketState(-1.0, 0.02, 0.0, 1.0)


def test_variance_floor(scho):
    low = MarketState(100.0, 1e-4, 0.5, 1.0)
    with pytest.raises(ModelError):
        check_variance_floor(low, scho)
    check_variance_floor(low, scho, override=True)
    check_variance_floor(MarketState(100.0, 0.0145, 0.5, 1.0), scho)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5), st.floats(1, 100), st.floats(0.05, 5), st.floats(-5, -0.01))
def test_c_rho_closed_form_property(a, b, lam, rho):
    p = GammaOUParams(a, b, lam, rho, 0.01)
    assert c_rho_quadrature(p) == pytest.approx(c_rho(p), rel=1e-8)
