import math

import numpy as np
import pytest

from bns_lrm.model import PRESETS, AssumptionError, GammaOUParams, MarketState, ModelError
from bns_lrm.strategy import (
    CSV_COLUMNS,
    FIGURE_SWEEPS,
    SweepSpec,
    delta_call,
    delta_put,
    is_monotone,
    lrm_call,
    lrm_put,
    max_abs_gradient,
    figure_sweeps,
    read_csv,
    sweep,
)


@pytest.fixture(scope="module")
def figures(scho, state0, mu0):
    return figure_sweeps(state0, scho, mu0)


def test_lrm_call_rho_zero(state0):
    p = GammaOUParams(1.4338, 11.6641, 0.5783, 0.0, 0.0145)
    assert lrm_call(state0, p, 0.007, 1124.47) == delta_call(state0, p, 0.007, 1124.47)


def test_lrm_call_deep_itm(scho, state0, mu0):
    assert 0.95 <= lrm_call(state0, scho, mu0, 200.0) <= 1.0


def test_lrm_call_deep_otm(scho, state0, mu0):
    assert 0.0 <= lrm_call(state0, scho, mu0, 2000.0) <= 0.05


def test_delta_limits(scho, state0, mu0):
    assert delta_call(state0, scho, mu0, 1e-8 * state0.spot) == pytest.approx(1.0, rel=1e-4)
    assert delta_call(state0, scho, mu0, 1e6 * state0.spot) == pytest.approx(0.0, abs=1e-9)
    d = delta_call(state0, scho, mu0, 1124.47)
    assert 0 < d < 1
    assert lrm_call(state0, scho, mu0, 1124.47) <= d


def test_puts(scho, state0, mu0):
    xp = lrm_put(state0, scho, mu0, 1124.47)
    assert -1 < xp < 0
    assert xp == pytest.approx(lrm_call(state0, scho, mu0, 1124.47) - 1.0)
    assert delta_put(state0, scho, mu0, 1124.47) == pytest.approx(
        delta_call(state0, scho, mu0, 1124.47) - 1.0)
    p = GammaOUParams(1.4338, 11.6641, 0.5783, 0.0, 0.0145)
    assert lrm_put(state0, p, 0.007, 1e-8 * state0.spot) == pytest.approx(0.0, abs=1e-4)


def test_assumption_gate(state0):
    bad = GammaOUParams(1.0, 2.0, 0.5783, -1.2606, 0.0145)
    with pytest.raises(AssumptionError):
        lrm_call(state0, bad, 0.0, 1000.0)


def test_sweep_spec_validation():
    with pytest.raises(ModelError):
        SweepSpec("time", 900.0, ())
    with pytest.raises(ModelError):
        SweepSpec("strike", 0.0, (-1.0,))
    with pytest.raises(ModelError):
        SweepSpec("bogus", 0.0, (1.0,))
    s = SweepSpec("strike", 0.5, (900, 1000))
    assert SweepSpec.from_dict(s.to_dict()) == s


def test_figure_grids():
    counts = {n: len(s.grid) for n, s in FIGURE_SWEEPS.items()}
    assert sorted(counts.values()) == [50, 50, 50, 73, 73, 73]
    assert FIGURE_SWEEPS["fig1a_K900"].grid[-1] == 0.98
    assert FIGURE_SWEEPS["fig2a_t0"].grid[0] == 200.0 and FIGURE_SWEEPS["fig2a_t0"].grid[-1] == 2000.0


def test_all_rows_succeed(figures):
    for tb in figures.values():
        assert tb.success_rate == 1.0


def test_xi_below_delta_everywhere(figures):
    for tb in figures.values():
        assert np.all(tb.column("xi") <= tb.column("delta") + 1e-8)


def test_delta_within_unit_interval(figures):
    for tb in figures.values():
        d = tb.column("delta")
        assert np.all((d >= -1e-6) & (d <= 1 + 1e-6))


def test_xi_within_unit_interval(figures):
    for name, tb in figures.items():
        x = tb.column("xi")
        assert np.all((x >= -1e-6) & (x <= 1 + 1e-6)), name


def test_time_sweep_itm_increasing(figures):
    tb = figures["fig1a_K900"]
    assert is_monotone(tb.column("xi"), True) and is_monotone(tb.column("delta"), True)


def test_time_sweep_atm_decreasing(figures):
    tb = figures["fig1b_K1124.47"]
    assert is_monotone(tb.column("xi"), False) and is_monotone(tb.column("delta"), False)


def test_time_sweep_otm_decreasing(figures):
    tb = figures["fig1c_K1300"]
    assert is_monotone(tb.column("delta"), False)
    assert is_monotone(tb.column("xi"), False)


def test_strike_sweep_t05_decreasing_near_atm(figures):
    tb = figures["fig2b_t0.5"]
    g = np.array(tb.spec.grid)
    sel = (g >= 900) & (g <= 1400)
    assert is_monotone(tb.column("xi")[sel], False)


def test_gradient_steeper_near_maturity(figures):
    g0 = max_abs_gradient(figures["fig2a_t0"].spec.grid, figures["fig2a_t0"].column("xi"))
    g9 = max_abs_gradient(figures["fig2c_t0.9"].spec.grid, figures["fig2c_t0.9"].column("xi"))
    x = figures["fig2c_t0.9"].column("xi")
    assert g9 > g0
    assert x[0] > 0.99 and abs(x[-1]) < 0.01


def test_csv_round_trip(figures):
    tb = figures["fig2b_t0.5"]
    text = tb.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(text)
    assert rows == tb.rows


def test_sweep_records_failures(scho, mu0):
    s = MarketState(1124.47, 0.0145, 0.0, 1.0, 0.019, 0.012)
    spec = SweepSpec("time", 1124.47, (0.0, 0.5))
    from bns_lrm.charfn import DampingConfig
    tb = sweep(spec, s, scho, mu0, DampingConfig(0.5))
    assert len(tb.rows) == 2
    assert all(not r.ok and not r.feasible for r in tb.rows)
    assert math.isnan(tb.rows[0].xi)


def test_sweep_threads_same_result(scho, state0, mu0):
    spec = SweepSpec("time", 900.0, (0.0, 0.3, 0.6))
    a = sweep(spec, state0, scho, mu0, threads=1)
    b = sweep(spec, state0, scho, mu0, threads=3)
    assert a.to_csv() == b.to_csv()
