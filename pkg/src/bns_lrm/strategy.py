"""LRM and delta hedge ratios for calls and puts, and the time / strike sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import pricer
from .charfn import DampingConfig, damping_feasible
from .model import GammaOUParams, MarketState, ModelError, validate_assumptions
from .pricer import FFTGridConfig, HedgeResult, QuadratureConfig

CSV_COLUMNS = ("grid_value", "xi", "delta", "price", "i1", "i2", "quad_err_i1", "quad_err_i2")


def _validated(state: MarketState, levy, mu: float, force: bool) -> None:
    validate_assumptions(levy, state.maturity, mu).require(force)


def hedge(state: MarketState, levy: GammaOUParams, mu: float, K: float,
          damping: DampingConfig | None = None, quad: QuadratureConfig | None = None,
          force: bool = False) -> HedgeResult:
    """Validated :func:`pricer.hedge`; refuses parameters that fail the standing assumptions."""
    _validated(state, levy, mu, force)
    return pricer.hedge(state, levy, mu, K, damping, quad)


def lrm_call(state, levy, mu, K, damping=None, quad=None, force=False) -> float:
    """LRM ratio (sigma_t^2 I1 + I2) / (S_t (sigma_t^2 + C_rho)) of a call."""
    return hedge(state, levy, mu, K, damping, quad, force).xi


def delta_call(state, levy, mu, K, damping=None, quad=None, force=False) -> float:
    return hedge(state, levy, mu, K, damping, quad, force).delta


def lrm_put(state, levy, mu, K, damping=None, quad=None, force=False) -> float:
    """Put LRM ratio from call-put parity of LRM strategies: xi_call - 1."""
    return lrm_call(state, levy, mu, K, damping, quad, force) - 1.0


def delta_put(state, levy, mu, K, damping=None, quad=None, force=False) -> float:
    """Put delta, derived as delta_call - 1."""
    return delta_call(state, levy, mu, K, damping, quad, force) - 1.0


@dataclass(frozen=True)
class SweepSpec:
    """``mode='time'``: fixed strike, grid of t. ``mode='strike'``: fixed t, grid of K."""

    mode: str
    fixed: float
    grid: tuple[float, ...]

    def __post_init__(self):
        if self.mode not in ("time", "strike"):
            raise ModelError(f"sweep mode must be 'time' or 'strike', got {self.mode!r}")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if not self.grid:
            raise ModelError("sweep grid is empty")
        if self.mode == "strike" and (min(self.grid) <= 0 or self.fixed < 0):
            raise ModelError("strike grid must be positive and t nonnegative")
        if self.mode == "time" and (min(self.grid) < 0 or self.fixed <= 0):
            raise ModelError("time grid must be nonnegative and the strike positive")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "fixed": self.fixed, "grid": list(self.grid)}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        return cls(d["mode"], float(d["fixed"]), tuple(d["grid"]))


@dataclass(frozen=True)
class SweepRow:
    grid_value: float
    xi: float
    delta: float
    price: float
    i1: float
    i2: float
    quad_err_i1: float
    quad_err_i2: float
    feasible: bool = True
    error: str | None = field(default=None, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def csv_values(self) -> list[str]:
        return [repr(float(getattr(self, c))) for c in CSV_COLUMNS]


@dataclass
class SweepTable:
    spec: SweepSpec
    rows: list[SweepRow]

    @property
    def success_rate(self) -> float:
        return sum(r.ok for r in self.rows) / len(self.rows) if self.rows else 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_values())
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for r in self.rows:
            d = {c: float(getattr(r, c)) for c in CSV_COLUMNS}
            d.update(feasible=r.feasible, error=r.error)
            rows.append(d)
        return json.dumps({"sweep": self.spec.to_dict(), "rows": rows}, indent=2,
                          allow_nan=True) + "\n"


def read_csv(text: str) -> list[SweepRow]:
    """Parse sweep CSV text; failed rows come back with NaN values."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ModelError(f"unexpected CSV header {header}")
    return [SweepRow(*(float(x) for x in rec)) for rec in reader if rec]


def _failed(g: float, exc: Exception, feasible: bool = True) -> SweepRow:
    nan = float("nan")
    return SweepRow(g, nan, nan, nan, nan, nan, nan, nan, feasible, f"{type(exc).__name__}: {exc}")


def _row(g: float, r: HedgeResult) -> SweepRow:
    return SweepRow(g, r.xi, r.delta, r.price, r.i1, r.i2, r.quad_err_i1, r.quad_err_i2)


def sweep(spec: SweepSpec, state: MarketState, levy: GammaOUParams, mu: float,
          damping: DampingConfig | None = None, quad: QuadratureConfig | None = None,
          fft_cfg: FFTGridConfig | None = None, force: bool = False,
          threads: int = 1) -> SweepTable:
    """Tabulate hedge ratios along a time or strike grid.

    Strike sweeps go through one FFT pass at the fixed t; time sweeps run the
    quadrature path per point with S_t and sigma_t^2 held at ``state``. Rows
    that fail (infeasible damping, quadrature trouble) are kept with NaN values
    and the error message; the sweep carries on.
    """
    damping = damping or DampingConfig()
    _validated(state, levy, mu, force)
    if spec.mode == "strike":
        st = state.at_time(spec.fixed)
        try:
            res = pricer.strike_grid_fft(st, levy, mu, spec.grid, damping, fft_cfg)
        except (ModelError, ArithmeticError) as exc:
            feas = damping_feasible(damping.alpha_damp, st, levy).feasible if st.tau > 0 else False
            return SweepTable(spec, [_failed(g, exc, feas) for g in spec.grid])
        return SweepTable(spec, [_row(g, r) for g, r in zip(spec.grid, res)])

    def one(t: float) -> SweepRow:
        try:
            st = state.at_time(t)
            feas = damping_feasible(damping.alpha_damp, st, levy).feasible
            if not feas:
                raise pricer.DampingError(f"alpha_damp={damping.alpha_damp} infeasible at t={t}")
            return _row(t, pricer.hedge(st, levy, mu, spec.fixed, damping, quad))
        except (ModelError, ArithmeticError) as exc:
            return _failed(t, exc, False if isinstance(exc, pricer.DampingError) else True)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, spec.grid))
    else:
        rows = [one(t) for t in spec.grid]
    return SweepTable(spec, rows)


def time_grid() -> tuple[float, ...]:
    """t = 0, 0.02, ..., 0.98."""
    return tuple(round(0.02 * k, 10) for k in range(50))


def strike_grid() -> tuple[float, ...]:
    """K = 200, 225, ..., 2000."""
    return tuple(float(k) for k in range(200, 2001, 25))


FIGURE_SWEEPS: dict[str, SweepSpec] = {
    "fig1a_K900": SweepSpec("time", 900.0, time_grid()),
    "fig1b_K1124.47": SweepSpec("time", 1124.47, time_grid()),
    "fig1c_K1300": SweepSpec("time", 1300.0, time_grid()),
    "fig2a_t0": SweepSpec("strike", 0.0, strike_grid()),
    "fig2b_t0.5": SweepSpec("strike", 0.5, strike_grid()),
    "fig2c_t0.9": SweepSpec("strike", 0.9, strike_grid()),
}


def figure_sweeps(state: MarketState, levy: GammaOUParams, mu: float,
                        damping: DampingConfig | None = None,
                        names: Iterable[str] | None = None, **kw) -> dict[str, SweepTable]:
    names = list(names) if names is not None else list(FIGURE_SWEEPS)
    return {n: sweep(FIGURE_SWEEPS[n], state, levy, mu, damping, **kw) for n in names}


def is_monotone(values: Sequence[float], increasing: bool, slack: float = 1e-6) -> bool:
    d = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(d >= -slack) if increasing else np.all(d <= slack))


def max_abs_gradient(grid: Sequence[float], values: Sequence[float]) -> float:
    g = np.gradient(np.asarray(values, dtype=float), np.asarray(grid, dtype=float))
    return float(np.max(np.abs(g))) if g.size else math.nan
