"""Characteristic function of log S_T under Gamma-OU BNS dynamics.

All functions accept complex scalars or arrays for the transform variable.
Logarithms are taken on the principal branch one factor at a time, and each
argument is required to stay in the right half-plane so that no branch cut is
ever crossed along a quadrature path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import CapabilityError, GammaOUParams, MarketState, ModelError, bcal


class BranchError(ArithmeticError):
    """A logarithm argument left the right half-plane."""


class StripError(ValueError):
    """Transform variable outside the supported analyticity strip."""


def _require_gamma(levy) -> None:
    if not isinstance(levy, GammaOUParams):
        raise CapabilityError(f"no characteristic function available for {levy.family}")


def moment_interval(state: MarketState, levy: GammaOUParams, n_grid: int = 1000
                    ) -> tuple[float, float]:
    """Open interval of damping exponents alpha with E[S_T^alpha | F_t] finite.

    A jump at time s contributes ``exp(alpha rho x + (alpha^2 - alpha) B(T-s) x / 2)``,
    which is integrable against exp(-theta_hat x) iff alpha lies between the roots
    ``c_s -+ sqrt(D_s)``, ``c_s = 1/2 - rho/B(T-s)``, ``D_s = c_s^2 + 2 theta_hat/B(T-s)``.
    The sup/inf over s in [t, T) is taken on a grid plus the s -> T limits.
    """
    if state.tau <= 0:
        return -math.inf, math.inf
    rho, th = levy.rho, levy.theta_hat
    s = state.t + state.tau * np.arange(n_grid) / n_grid
    B = bcal(state.maturity - s, levy.lam)
    c = 0.5 - rho / B
    sqrt_d = np.sqrt(c * c + 2.0 * th / B)
    # lower root written without cancellation
    lower_pts = -(2.0 * th / B) / (c + sqrt_d)
    upper_pts = c + sqrt_d
    # s -> T: lower -> theta_hat/rho (or -inf when rho = 0), upper -> +inf
    lower_limit = th / rho if rho < 0 else -math.inf
    return float(max(lower_pts.max(), lower_limit)), float(upper_pts.min())


def strip_bounds(state: MarketState, levy: GammaOUParams) -> tuple[float, float]:
    """Open bounds on Im(theta) supported by :func:`phi` (theta = v - i*alpha)."""
    lower, upper = moment_interval(state, levy)
    return -upper, -lower


def log_phi(theta, state: MarketState, levy: GammaOUParams, mu: float, check: bool = True):
    """Exponent of :func:`phi`, i.e. ``log E[exp(i theta log S_T) | S_t, sigma_t^2]``."""
    _require_gamma(levy)
    th = np.asarray(theta, dtype=complex)
    tau = state.tau
    x0 = math.log(state.spot)
    if tau == 0:
        return 1j * th * x0
    if check:
        lo, hi = strip_bounds(state, levy)
        im = th.imag
        if np.any(im <= lo) or np.any(im >= hi):
            raise StripError(f"Im(theta) must lie in ({lo:.6g}, {hi:.6g})")
    a, b, lam, rho = levy.a, levy.b, levy.lam, levy.rho
    B = bcal(tau, lam)
    quad = th * th + 1j * th
    # f1 = i th rho - (th^2 + i th) B / 2 and f2 = i th rho - (th^2 + i th) / (2 lam):
    # these put the mean of the integrated variance at sigma_t^2 B + (a/b)(tau - B)
    f1 = 1j * th * rho - 0.5 * quad * B
    f2 = 1j * th * rho - 0.5 * quad / lam
    num = b - f1
    den = b - 1j * th * rho
    if check and (np.any(num.real <= 0) or np.any(den.real <= 0)):
        raise BranchError("logarithm argument crossed into the left half-plane")
    log_ratio = np.log(num) - np.log(den)
    jump = a / (b - f2) * (b * log_ratio + f2 * lam * tau)
    return 1j * th * (x0 + mu * tau) - 0.5 * quad * B * state.sigma_sq + jump


def phi(theta, state: MarketState, levy: GammaOUParams, mu: float, check: bool = True):
    """Characteristic function of log S_T given (S_t, sigma_t^2).

    ``phi(-1j)`` is the forward ``E[S_T]``; at ``tau = 0`` the result is the
    point mass ``S_t^{i theta}``.
    """
    return np.exp(log_phi(theta, state, levy, mu, check))


def phi_shifted(theta, z, state: MarketState, levy: GammaOUParams, mu: float,
                check: bool = True):
    """Characteristic function when the time-t squared volatility is sigma_t^2 + z."""
    if np.any(np.asarray(z) < 0):
        raise ModelError("variance shift z must be nonnegative")
    th = np.asarray(theta, dtype=complex)
    B = bcal(state.tau, levy.lam)
    return phi(th, state, levy, mu, check) * np.exp(-(th * th + 1j * th) * 0.5 * B * z)


def eta(zeta, state: MarketState, levy: GammaOUParams):
    """``i rho zeta - (zeta^2 + i zeta) B(T-t)/2``, the exponent rate of a variance jump."""
    zt = np.asarray(zeta, dtype=complex)
    B = bcal(state.tau, levy.lam)
    return 1j * levy.rho * zt - (zt * zt + 1j * zt) * 0.5 * B


def jump_kernel(zeta, state: MarketState, levy: GammaOUParams, check: bool = True):
    """``int (e^{eta z} - 1)(e^{rho z} - 1) nu(dz)`` in closed form (valid for Re eta <= 0)."""
    e = eta(zeta, state, levy)
    if levy.rho == 0:
        return np.zeros_like(e)
    if check and np.any(e.real > 1e-12):
        raise StripError("Re(eta) > 0: damping parameter outside (0, 1 - 2 rho / B(T-t))")
    a, b, lam, rho = levy.a, levy.b, levy.lam, levy.rho
    return a * b * lam * (1.0 / (b - e - rho) - 1.0 / (b - e) - 1.0 / (b - rho) + 1.0 / b)


@dataclass(frozen=True)
class DampingConfig:
    """Carr-Madan damping: the integration contour is zeta = v - i*alpha_damp."""

    alpha_damp: float = 1.75

    def __post_init__(self):
        if not math.isfinite(self.alpha_damp):
            raise ModelError("alpha_damp must be finite")


@dataclass(frozen=True)
class DampingReport:
    alpha_damp: float
    t: float
    moment_lower: float
    moment_upper: float
    in_moment_interval: bool
    sufficient_upper: float
    in_sufficient_interval: bool
    call_contour: bool

    @property
    def feasible(self) -> bool:
        return self.in_moment_interval and self.in_sufficient_interval and self.call_contour

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feasible"] = self.feasible
        return d


def damping_feasible(alpha_damp: float, state: MarketState, levy: GammaOUParams,
                     n_grid: int = 1000) -> DampingReport:
    """Check a damping exponent against the admissible intervals at time t.

    Three conditions are reported:

    * the moment interval ``sup_s {c_s - sqrt(D_s)} < alpha < inf_s {c_s + sqrt(D_s)}``
      with ``c_s = 1/2 - rho/B(T-s)``, evaluated on ``n_grid`` points of [t, T)
      plus the s -> T limits;
    * the sufficient interval ``0 < alpha < 1 - 2 rho / B(T-t)`` under which
      Re(eta) <= 0;
    * ``alpha > 1``, which puts the contour on the call side of the pole at
      zeta = -i.

    With rho = 0 the jump kernel vanishes identically, so the sufficient
    interval (which only guards that kernel) is not required.
    """
    _require_gamma(levy)
    if state.tau <= 0:
        raise ModelError("damping analysis needs T > t")
    rho = levy.rho
    lower, upper = moment_interval(state, levy, n_grid)
    suff = 1.0 - 2.0 * rho / bcal(state.tau, levy.lam)
    return DampingReport(
        alpha_damp=float(alpha_damp), t=state.t,
        moment_lower=lower, moment_upper=upper,
        in_moment_interval=bool(lower < alpha_damp < upper),
        sufficient_upper=float(suff),
        in_sufficient_interval=bool(0 < alpha_damp < suff) or rho == 0,
        call_contour=bool(alpha_damp > 1),
    )
