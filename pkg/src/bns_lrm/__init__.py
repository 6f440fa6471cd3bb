"""Local risk minimisation and delta hedging under Gamma-OU BNS stochastic volatility."""

from .charfn import DampingConfig, damping_feasible, phi
from .model import (
    AssumptionError,
    CapabilityError,
    GammaOUParams,
    IGOUParams,
    MarketState,
    ModelError,
    PRESETS,
    alpha_drift,
    c_rho,
    martingale_drift,
    preset,
    validate_assumptions,
)
from .pricer import FFTGridConfig, HedgeResult, QuadratureConfig, hedge, strike_grid_fft
from .strategy import SweepSpec, delta_call, delta_put, lrm_call, lrm_put, sweep

__version__ = "0.1.0"
