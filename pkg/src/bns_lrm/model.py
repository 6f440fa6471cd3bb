"""Model parameters, Levy measures and standing-assumption checks.

Two variance drivers are supported for the BNS model:

* Gamma-OU: the driving Levy measure of ``J_t = H_{lambda t}`` is
  ``nu(dx) = a b lambda exp(-b x) dx``, a compound Poisson measure with
  rate ``a lambda`` and exponential(b) marks. Everything downstream (pricing,
  hedging, simulation) is implemented for this case.
* IG-OU: only the Levy density and the assumption checks are available.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Union

import numpy as np
from scipy import integrate


class ModelError(ValueError):
    """Invalid model parameters or market inputs."""


class AssumptionError(ModelError):
    """Raised when a computation is attempted on parameters failing the standing assumptions."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        names = ", ".join(c.name for c in report.failures)
        super().__init__(f"standing assumptions violated: {names}")


class CapabilityError(ModelError):
    """The requested operation is not available for this model family."""


def bcal(tau, lam: float):
    """Integrated OU decay kernel ``(1 - exp(-lam*tau)) / lam``.

    Accepts scalars or arrays; ``tau = inf`` gives ``1/lam``.
    """
    if not lam > 0:
        raise ModelError(f"lambda must be positive, got {lam}")
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0) or np.any(np.isnan(tau_arr)):
        raise ModelError("tau must be nonnegative")
    out = -np.expm1(-lam * tau_arr) / lam
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class GammaOUParams:
    """Gamma-OU volatility parameters.

    Attributes:
        a: Gamma shape of the stationary law of sigma^2.
        b: Gamma rate (1 / jump size).
        lam: Mean-reversion rate.
        rho: Leverage, must be nonpositive.
        sigma0_sq: Squared volatility at time 0.
    """

    a: float
    b: float
    lam: float
    rho: float
    sigma0_sq: float

    family = "gamma-ou"

    def __post_init__(self):
        _check_common(self)

    @property
    def theta_hat(self) -> float:
        # sup{theta : int (e^{theta x} - 1) nu(dx) < inf}
        return self.b

    @property
    def jump_rate(self) -> float:
        return self.a * self.lam

    def levy_density(self, x):
        """Density of nu = lam * nu^H on (0, inf); zero elsewhere."""
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            dens = self.a * self.b * self.lam * np.exp(-self.b * np.where(x > 0, x, 0.0))
        return np.where(x > 0, dens, 0.0)

    def quadrature_upper(self) -> float:
        # exp(-b x_max) < 1e-16
        return 16.0 * math.log(10.0) / self.b * 1.01

    def to_dict(self) -> dict:
        return {"model": self.family, "a": self.a, "b": self.b, "lambda": self.lam,
                "rho": self.rho, "sigma0_sq": self.sigma0_sq}


@dataclass(frozen=True)
class IGOUParams:
    """IG-OU volatility parameters (assumption checks only, no pricing)."""

    a: float
    b: float
    lam: float
    rho: float
    sigma0_sq: float

    family = "ig-ou"

    def __post_init__(self):
        _check_common(self)

    @property
    def theta_hat(self) -> float:
        return 0.5 * self.b ** 2

    def levy_density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        dens = (self.a / (2.0 * math.sqrt(2.0 * math.pi)) * xs ** -1.5
                * (1.0 + self.b ** 2 * xs) * np.exp(-0.5 * self.b ** 2 * xs))
        return np.where(x > 0, self.lam * dens, 0.0)

    def quadrature_upper(self) -> float:
        return 2.0 * 40.0 / self.b ** 2

    def to_dict(self) -> dict:
        return {"model": self.family, "a": self.a, "b": self.b, "lambda": self.lam,
                "rho": self.rho, "sigma0_sq": self.sigma0_sq}


LevyParams = Union[GammaOUParams, IGOUParams]


def _check_common(p) -> None:
    for name in ("a", "b", "lam", "sigma0_sq"):
        v = getattr(p, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ModelError(f"{name} must be a positive finite number, got {v!r}")
    if not (math.isfinite(p.rho) and p.rho <= 0):
        raise ModelError(f"rho must be nonpositive, got {p.rho!r}")


# Estimated parameter sets (Nicolato-Venardos and Schoutens).
PRESETS: dict[str, LevyParams] = {
    "NV-IG": IGOUParams(a=0.0872, b=11.9800, lam=2.4958, rho=-4.7039, sigma0_sq=0.0041),
    "Scho-IG": IGOUParams(a=6.2410, b=0.7995, lam=0.0636, rho=-0.1926, sigma0_sq=0.0156),
    "NV-Gamma": GammaOUParams(a=1.0071, b=116.0100, lam=1.6787, rho=-4.4617, sigma0_sq=0.0043),
    "Scho-Gamma": GammaOUParams(a=1.4338, b=11.6641, lam=0.5783, rho=-1.2606, sigma0_sq=0.0145),
}

_FAMILIES = {"gamma-ou": GammaOUParams, "ig-ou": IGOUParams}
_FIELDS = {"a": "a", "b": "b", "lambda": "lam", "rho": "rho", "sigma0_sq": "sigma0_sq"}


def preset(name: str) -> LevyParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ModelError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def params_from_dict(data: dict[str, Any]) -> LevyParams:
    """Build parameters from the JSON schema.

    Explicit fields win; a ``preset`` only fills the fields that are absent.
    """
    if not isinstance(data, dict):
        raise ModelError("parameter block must be a JSON object")
    unknown = set(data) - set(_FIELDS) - {"model", "preset"}
    if unknown:
        raise ModelError(f"unknown parameter fields: {sorted(unknown)}")
    base: dict[str, Any] = {}
    family = data.get("model")
    if data.get("preset") is not None:
        p = preset(data["preset"])
        base = {k: getattr(p, v) for k, v in _FIELDS.items()}
        if family is None:
            family = p.family
        elif family != p.family:
            raise ModelError(f"model {family!r} conflicts with preset family {p.family!r}")
    base.update({k: data[k] for k in _FIELDS if k in data})
    if family not in _FAMILIES:
        raise ModelError(f"model must be one of {sorted(_FAMILIES)}, got {family!r}")
    missing = [k for k in _FIELDS if k not in base]
    if missing:
        raise ModelError(f"missing parameter fields: {missing}")
    try:
        kwargs = {v: float(base[k]) for k, v in _FIELDS.items()}
    except (TypeError, ValueError) as exc:
        raise ModelError(f"non-numeric parameter: {exc}") from None
    return _FAMILIES[family](**kwargs)


@dataclass(frozen=True)
class MarketState:
    """Evaluation-time inputs: spot, squared volatility, t, T and rates."""

    spot: float
    sigma_sq: float
    t: float
    maturity: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.spot) and self.spot > 0):
            raise ModelError(f"spot must be positive, got {self.spot}")
        if not (math.isfinite(self.sigma_sq) and self.sigma_sq > 0):
            raise ModelError(f"sigma_sq must be positive, got {self.sigma_sq}")
        if not (0 <= self.t <= self.maturity) or not math.isfinite(self.maturity):
            raise ModelError(f"need 0 <= t <= maturity, got t={self.t}, T={self.maturity}")
        if not (math.isfinite(self.r) and math.isfinite(self.q)):
            raise ModelError("rates must be finite")

    @property
    def tau(self) -> float:
        return self.maturity - self.t

    @property
    def carry(self) -> float:
        return self.r - self.q

    @property
    def discount(self) -> float:
        """exp(-(r-q)(T-t))."""
        return math.exp(-self.carry * self.tau)

    def at_time(self, t: float) -> "MarketState":
        return replace(self, t=t)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MarketState":
        try:
            return cls(**{k: float(v) for k, v in data.items()})
        except TypeError as exc:
            raise ModelError(str(exc)) from None


def check_variance_floor(state: MarketState, levy: LevyParams, override: bool = False) -> None:
    """Reject sigma_t^2 below the pathwise floor exp(-lam t) sigma_0^2 unless overridden."""
    floor = math.exp(-levy.lam * state.t) * levy.sigma0_sq
    if state.sigma_sq < floor * (1.0 - 1e-12) and not override:
        raise ModelError(
            f"sigma_t^2={state.sigma_sq} is below the floor exp(-lambda t) sigma_0^2={floor:.6g}")


def _quad(f, upper: float) -> float:
    val, _ = integrate.quad(f, 0.0, upper, epsabs=1e-14, epsrel=1e-12, limit=500)
    return val


def c_rho(levy: LevyParams) -> float:
    """Jump quadratic-variation constant ``int (e^{rho x} - 1)^2 nu(dx)``."""
    if levy.rho == 0:
        return 0.0
    if isinstance(levy, GammaOUParams):
        a, b, lam, rho = levy.a, levy.b, levy.lam, levy.rho
        # abλ[1/(b-2ρ) - 2/(b-ρ) + 1/b] written without cancellation
        return a * b * lam * 2 * rho ** 2 / (b * (b - rho) * (b - 2 * rho))
    return c_rho_quadrature(levy)


def c_rho_quadrature(levy: LevyParams) -> float:
    """Adaptive Gauss-Kronrod evaluation of the defining integral of C_rho."""
    rho = levy.rho
    return _quad(lambda x: np.expm1(rho * x) ** 2 * float(levy.levy_density(x)),
                 levy.quadrature_upper())


def jump_compensator(levy: LevyParams) -> float:
    """``int (e^{rho x} - 1) nu(dx)``; closed form for Gamma-OU."""
    if levy.rho == 0:
        return 0.0
    if isinstance(levy, GammaOUParams):
        return levy.a * levy.lam * levy.rho / (levy.b - levy.rho)
    rho = levy.rho
    return _quad(lambda x: np.expm1(rho * x) * float(levy.levy_density(x)),
                 levy.quadrature_upper())


def martingale_drift(levy: LevyParams, r: float, q: float) -> float:
    """Drift mu making exp(-(r-q)t) S_t a martingale: r - q - a lam rho/(b - rho)."""
    return r - q - jump_compensator(levy)


def alpha_drift(levy: LevyParams, mu: float) -> float:
    """Return rate alpha = mu + int (e^{rho x} - 1) nu(dx)."""
    return mu + jump_compensator(levy)


@dataclass(frozen=True)
class ModelConstants:
    c_rho: float
    mu: float
    alpha_drift: float
    theta_hat: float
    c_u: float
    c_theta: float
    c_theta_hat: float
    bcal_T: float

    def to_dict(self) -> dict:
        return asdict(self)


def bound_constants(levy: LevyParams, T: float, alpha: float) -> tuple[float, float, float]:
    """Constants (C_u, C_theta, C_theta_hat) bounding u_s and theta_{s,x}.

    C_theta_hat bounds 1/(1 - theta_{s,x}); it is the final inequality of the
    bounding argument, max(1, 1/(1 + alpha/(e^{-lam T} sigma_0^2 + C_rho))).
    """
    crho = c_rho(levy)
    floor = math.exp(-levy.lam * T) * levy.sigma0_sq
    ratio = alpha / (floor + crho)
    if not ratio > -1:
        raise AssumptionError(validate_assumptions(levy, T, alpha - jump_compensator(levy)))
    first = abs(alpha) * math.exp(0.5 * levy.lam * T) / math.sqrt(levy.sigma0_sq)
    if crho > 0:
        c_u = max(first, abs(alpha) / crho)
        c_theta = max(abs(alpha) / crho, 1.0)
    else:
        c_u = first
        c_theta = 1.0
    c_theta_hat = max(1.0, 1.0 / (1.0 + ratio))
    return c_u, c_theta, c_theta_hat


def model_constants(levy: LevyParams, T: float, mu: float) -> ModelConstants:
    alpha = alpha_drift(levy, mu)
    c_u, c_theta, c_theta_hat = bound_constants(levy, T, alpha)
    return ModelConstants(
        c_rho=c_rho(levy), mu=mu, alpha_drift=alpha, theta_hat=levy.theta_hat,
        c_u=c_u, c_theta=c_theta, c_theta_hat=c_theta_hat, bcal_T=bcal(T, levy.lam))


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    margin: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    model: str
    T: float
    mu: float
    checks: tuple[AssumptionCheck, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def require(self, force: bool = False) -> None:
        if not self.ok and not force:
            raise AssumptionError(self)

    def to_dict(self) -> dict:
        return {"model": self.model, "T": self.T, "mu": self.mu, "ok": self.ok,
                "checks": [asdict(c) for c in self.checks]}


def validate_assumptions(levy: LevyParams, T: float, mu: float) -> ValidationReport:
    """Check the two standing assumptions plus positivity of theta_hat.

    1. exponential moment: Gamma-OU ``b > 2 max(B(T), |rho|)``,
       IG-OU ``b^2/2 > 2 max(B(T), |rho|)``;
    2. ``alpha / (e^{-lam T} sigma_0^2 + C_rho) > -1``;
    3. ``theta_hat > 0``.
    """
    if not T > 0:
        raise ModelError(f"T must be positive, got {T}")
    bound = 2.0 * max(bcal(T, levy.lam), abs(levy.rho))
    moment = levy.theta_hat - bound
    what = "b" if isinstance(levy, GammaOUParams) else "b^2/2"
    item1 = AssumptionCheck(
        "exponential_moment", moment > 0, moment,
        f"{what}={levy.theta_hat:.6g} vs 2*max(B(T),|rho|)={bound:.6g}")

    alpha = alpha_drift(levy, mu)
    ratio = alpha / (math.exp(-levy.lam * T) * levy.sigma0_sq + c_rho(levy))
    item2 = AssumptionCheck(
        "drift_ratio", ratio > -1, ratio + 1.0,
        f"alpha/(e^(-lambda T) sigma0^2 + C_rho)={ratio:.6g} > -1")

    item3 = AssumptionCheck(
        "theta_hat_positive", levy.theta_hat > 0, levy.theta_hat,
        f"theta_hat={levy.theta_hat:.6g}")
    return ValidationReport(levy.family, T, mu, (item1, item2, item3))
