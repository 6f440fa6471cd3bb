import math

import numpy as np
import pytest

from bns_lrm.charfn import DampingConfig
from bns_lrm.model import PRESETS, CapabilityError, GammaOUParams, MarketState, ModelError, c_rho
from bns_lrm.pricer import (
    DampingError,
    FFTGridConfig,
    QuadratureConfig,
    WindowError,
    fourier_integrals,
    hedge,
    i1,
    i2,
    price_call,
    price_put,
    strike_grid_fft,
)

STRIKES = (900.0, 1124.47, 1300.0)


def test_i1_small_strike_is_spot(scho, state0, mu0):
    assert i1(state0, scho, mu0, 1e-8 * state0.spot) == pytest.approx(state0.spot, rel=1e-4)


def test_i1_huge_strike_is_zero(scho, state0, mu0):
    cfg = QuadratureConfig()
    assert abs(i1(state0, scho, mu0, 1e6 * state0.spot, quad=cfg)) <= cfg.abs_tol


def test_i2_small_strike_limit(scho, state0, mu0):
    val = i2(state0, scho, mu0, 1e-8 * state0.spot)
    assert val == pytest.approx(state0.spot * c_rho(scho), rel=1e-3)


def test_i2_zero_rho(state0):
    p = GammaOUParams(1.4338, 11.6641, 0.5783, 0.0, 0.0145)
    assert i2(state0, p, 0.007, 1124.47) == 0.0


def test_price_small_strike_is_forward(scho, state0, mu0):
    K = 1e-8 * state0.spot
    assert price_call(state0, scho, mu0, K) == pytest.approx(state0.spot - K * state0.discount, rel=1e-6)


@pytest.mark.parametrize("K", STRIKES)
def test_hedge_invariants(scho, state0, mu0, K):
    r = hedge(state0, scho, mu0, K)
    lower = max(state0.spot - K * state0.discount, 0.0)
    assert r.price >= lower - 1e-8
    assert -1e-8 <= r.delta <= 1 + 1e-8
    assert r.xi <= r.delta + 1e-8
    assert r.quad_err_i1 < 1e-6 and r.quad_err_i2 < 1e-6


def test_put_call_parity(scho, state0, mu0):
    K = 1000.0
    put = price_put(state0, scho, mu0, K)
    assert put > 0
    assert put == pytest.approx(price_call(state0, scho, mu0, K) - state0.spot + K * state0.discount)


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_damping_alpha_shift(scho, state0, mu0, alpha):
    ref = fourier_integrals(state0, scho, mu0, 1124.47)
    alt = fourier_integrals(state0, scho, mu0, 1124.47, DampingConfig(alpha))
    for q in ("i1", "i2", "price"):
        assert alt[q] == pytest.approx(ref[q], rel=1e-6)


def test_xi_equals_delta_when_rho_zero(state0):
    p = GammaOUParams(1.4338, 11.6641, 0.5783, 0.0, 0.0145)
    r = hedge(state0, p, 0.007, 1124.47)
    assert r.xi == r.delta


def test_hedge_mid_life(scho, mu0):
    s = MarketState(1124.47, 0.0145, 0.5, 1.0, 0.019, 0.012)
    r = hedge(s, scho, mu0, 1124.47)
    assert 0 < r.xi < r.delta < 1


def test_errors(scho, state0, mu0):
    with pytest.raises(ModelError):
        hedge(state0, scho, mu0, 0.0)
    with pytest.raises(DampingError):
        hedge(state0, scho, mu0, 1000.0, DampingConfig(0.5))
    with pytest.raises(CapabilityError):
        hedge(state0, PRESETS["NV-IG"], 0.0, 1000.0)
    with pytest.raises(ModelError):
        hedge(MarketState(1124.47, 0.0145, 1.0, 1.0), scho, mu0, 1000.0)


def test_fft_empty(scho, state0, mu0):
    assert strike_grid_fft(state0, scho, mu0, []) == []


def test_fft_figure_strikes(scho, state0, mu0):
    res = strike_grid_fft(state0, scho, mu0, STRIKES)
    assert len(res) == 3
    for r in res:
        assert math.isfinite(r.xi) and math.isfinite(r.delta)
        assert r.xi <= r.delta


def test_fft_grid_node_matches_quadrature(scho, state0, mu0):
    cfg = FFTGridConfig()
    K = math.exp(math.log(state0.spot) + 40 * cfg.dk)
    f = strike_grid_fft(state0, scho, mu0, [K], fft_cfg=cfg)[0]
    q = hedge(state0, scho, mu0, K)
    for name in ("i1", "i2", "price"):
        assert getattr(f, name) == pytest.approx(getattr(q, name), rel=1e-4)


@pytest.mark.parametrize("t", [0.0, 0.5])
def test_fft_matches_quadrature_grid(scho, mu0, t):
    s = MarketState(1124.47, 0.0145, t, 1.0, 0.019, 0.012)
    ks = np.linspace(200, 2000, 12)
    res = strike_grid_fft(s, scho, mu0, ks)
    for K, f in zip(ks, res):
        q = hedge(s, scho, mu0, K)
        scale = max(abs(q.price), 1e-6)
        assert f.price == pytest.approx(q.price, rel=1e-4, abs=1e-4 * scale)
        assert f.i1 == pytest.approx(q.i1, rel=1e-4)
        assert f.xi == pytest.approx(q.xi, rel=1e-4, abs=1e-8)
        assert f.diagnostics["method"] == "fft"


def test_fft_window(scho, state0, mu0):
    with pytest.raises(WindowError):
        strike_grid_fft(state0, scho, mu0, [1e-30])
    with pytest.raises(ModelError):
        FFTGridConfig(n=1000)
