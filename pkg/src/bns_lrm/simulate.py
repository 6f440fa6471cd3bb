"""Exact Monte Carlo for the Gamma-OU BNS model.

The Gamma-OU driver has finite Levy mass ``a*lam`` per unit time, so on
``(t, T]`` the jumps of J form a compound Poisson process with exponential(b)
marks. Given the jump skeleton, the terminal variance, the integrated variance
and the log return are available in closed form:

    sigma_T^2 = e^{-lam tau} sigma_t^2 + sum_i e^{-lam (T - t_i)} x_i
    V         = sigma_t^2 B(tau) + sum_i x_i B(T - t_i)
    log S_T   = log S_t + mu tau - V/2 + sqrt(V) G + rho * sum_i x_i

with G standard normal and independent of the skeleton. Nothing is
discretised in time.

Random numbers come from counter-based Philox streams keyed by
``(seed, block index)`` over fixed-size path blocks, and block statistics are
merged in block order, so results do not depend on the number of threads.
"""

from __future__ import annotations

import math
import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    CapabilityError,
    GammaOUParams,
    MarketState,
    ModelError,
    bcal,
    bound_constants,
    c_rho,
)

THREADS_ENV = "BNS_LRM_THREADS"


class InsufficientPathsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``n_paths`` counts simulated price paths, antithetic partners included.
    ``block_size`` fixes the RNG stream layout and must stay constant for
    results to be reproducible; ``threads`` only changes scheduling.
    """

    n_paths: int = 200_000
    seed: int = 42
    n_z_nodes: int = 64
    antithetic: bool = True
    block_size: int = 8192
    threads: int | None = None
    se_tolerance: float | None = None
    z_nodes: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.n_paths < 2:
            raise ModelError("n_paths must be at least 2")
        if self.block_size < 2 or self.block_size % 2:
            raise ModelError("block_size must be a positive even integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ModelError("seed must fit in 64 bits")
        if self.z_nodes is not None:
            nodes, weights = self.z_nodes
            if len(nodes) != len(weights) or min(nodes) <= 0 or min(weights) <= 0:
                raise ModelError("z nodes and weights must be positive and paired")


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def zscore(self, reference: float) -> float:
        if self.se == 0:
            return 0.0 if self.value == reference else math.copysign(math.inf, self.value - reference)
        return (self.value - reference) / self.se

    def __format__(self, spec):
        return f"{format(self.value, spec)} ± {format(self.se, spec)}"


@dataclass(frozen=True)
class JumpPath:
    """One jump skeleton of J on (t, T] with its closed-form functionals."""

    t: float
    maturity: float
    sigma_sq_t: float
    jump_times: tuple[float, ...]
    jump_sizes: tuple[float, ...]
    sigma_sq_terminal: float
    integrated_variance: float
    total_jump: float


@dataclass(frozen=True)
class LogReturnSample:
    l_terminal: float
    gaussian_draw: float
    path: JumpPath


@dataclass(frozen=True)
class JumpSkeletons:
    """A batch of jump skeletons in flat (ragged) storage, sorted by path then time."""

    t: float
    maturity: float
    sigma_sq_t: float
    counts: np.ndarray
    times: np.ndarray
    sizes: np.ndarray
    lam: float

    @property
    def n_paths(self) -> int:
        return int(self.counts.size)

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.counts.size), self.counts)

    @property
    def tau(self) -> float:
        return self.maturity - self.t

    @property
    def total_jump(self) -> np.ndarray:
        return np.bincount(self.owner, self.sizes, minlength=self.n_paths)

    @property
    def sigma_sq_terminal(self) -> np.ndarray:
        decay = np.exp(-self.lam * (self.maturity - self.times))
        return (math.exp(-self.lam * self.tau) * self.sigma_sq_t
                + np.bincount(self.owner, decay * self.sizes, minlength=self.n_paths))

    @property
    def integrated_variance(self) -> np.ndarray:
        kern = bcal(self.maturity - self.times, self.lam) if self.times.size else self.times
        return (self.sigma_sq_t * bcal(self.tau, self.lam)
                + np.bincount(self.owner, kern * self.sizes, minlength=self.n_paths))

    def path(self, i: int) -> JumpPath:
        start = int(self.counts[:i].sum())
        stop = start + int(self.counts[i])
        return JumpPath(
            self.t, self.maturity, self.sigma_sq_t,
            tuple(self.times[start:stop].tolist()), tuple(self.sizes[start:stop].tolist()),
            float(self.sigma_sq_terminal[i]), float(self.integrated_variance[i]),
            float(self.total_jump[i]))


def _check_gamma(levy) -> None:
    if not isinstance(levy, GammaOUParams):
        raise CapabilityError(
            f"exact simulation is only available for gamma-ou (finite activity), not {levy.family}")


def sample_jump_skeletons(levy: GammaOUParams, t: float, T: float, sigma_sq_t: float,
                          n: int, rng: np.random.Generator) -> JumpSkeletons:
    """Draw ``n`` independent compound-Poisson skeletons of J on (t, T]."""
    _check_gamma(levy)
    if not T > t:
        raise ModelError("need T > t")
    tau = T - t
    counts = rng.poisson(levy.jump_rate * tau, n)
    m = int(counts.sum())
    times = T - tau * rng.random(m)
    sizes = rng.exponential(1.0 / levy.b, m)
    owner = np.repeat(np.arange(n), counts)
    order = np.lexsort((times, owner))
    return JumpSkeletons(t, T, sigma_sq_t, counts, times[order], sizes[order], levy.lam)


def sample_jump_path(levy: GammaOUParams, t: float, T: float, sigma_sq_t: float,
                     rng: np.random.Generator) -> JumpPath:
    return sample_jump_skeletons(levy, t, T, sigma_sq_t, 1, rng).path(0)


def jump_path_from_jumps(levy: GammaOUParams, t: float, T: float, sigma_sq_t: float,
                         times: Sequence[float], sizes: Sequence[float]) -> JumpPath:
    """Build a skeleton from given jumps (used to pin down known cases)."""
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if times.shape != sizes.shape or np.any((times <= t) | (times > T)) or np.any(sizes <= 0):
        raise ModelError("jumps must lie in (t, T] with positive sizes")
    order = np.argsort(times, kind="stable")
    sk = JumpSkeletons(t, T, sigma_sq_t, np.array([times.size]), times[order], sizes[order],
                       levy.lam)
    return sk.path(0)


def sample_log_return(path: JumpPath, mu: float, rho: float,
                      rng: np.random.Generator) -> LogReturnSample:
    """Draw L_T - L_t = mu tau - V/2 + sqrt(V) G + rho dJ given the skeleton."""
    g = float(rng.standard_normal())
    v = path.integrated_variance
    tau = path.maturity - path.t
    lt = mu * tau - 0.5 * v + math.sqrt(v) * g + rho * path.total_jump
    return LogReturnSample(lt, g, path)


def laguerre_z_nodes(levy: GammaOUParams, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and positive weights with ``sum w_j f(z_j) ~ int f(z) nu(dz)``.

    Gauss-Laguerre in ``x = b z`` absorbs the exp(-b z) factor of the density;
    nodes whose weight underflows are dropped.
    """
    x, w = np.polynomial.laguerre.laggauss(n)
    keep = w > 0
    return x[keep] / levy.b, levy.jump_rate * w[keep]


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))


def _n_threads(mc: McConfig) -> int:
    want = mc.threads or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            want = min(want, max(int(cap), 1))
        except ValueError:
            raise ModelError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(want, 1)


class _Stats:
    """Per-column mean / sum of squared deviations, merged in a fixed order."""

    def __init__(self, n, mean, m2):
        self.n, self.mean, self.m2 = n, mean, m2

    @classmethod
    def of(cls, y: np.ndarray) -> "_Stats":
        mean = y.mean(axis=0)
        return cls(y.shape[0], mean, ((y - mean) ** 2).sum(axis=0))

    def merge(self, other: "_Stats") -> "_Stats":
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * (other.n / n)
        m2 = self.m2 + other.m2 + d * d * (self.n * other.n / n)
        return _Stats(n, mean, m2)

    def estimates(self) -> list[Estimate]:
        var = self.m2 / max(self.n - 1, 1)
        se = np.sqrt(var / self.n)
        return [Estimate(float(m), float(s)) for m, s in zip(self.mean, se)]


@dataclass(frozen=True)
class McHedgeEstimates:
    strike: float
    i1: Estimate
    i2: Estimate
    price: Estimate
    xi: Estimate
    put_price: Estimate
    put_xi: Estimate


@dataclass(frozen=True)
class McBattery:
    """All estimators from one simulation run."""

    n_paths: int
    hedges: tuple[McHedgeEstimates, ...]
    martingale: Estimate
    shifted_legs: tuple[Estimate, ...]
    z_nodes: np.ndarray = field(repr=False)
    thetas: np.ndarray = field(repr=False)
    phi_values: np.ndarray = field(repr=False)
    phi_se: np.ndarray = field(repr=False)


def _block_observations(n_obs: int, rng: np.random.Generator, state: MarketState,
                        levy: GammaOUParams, mu: float, strikes: np.ndarray,
                        zn: np.ndarray, zw: np.ndarray, thetas: np.ndarray,
                        antithetic: bool) -> np.ndarray:
    """Per-observation rows (one row per antithetic pair when enabled)."""
    sk = sample_jump_skeletons(levy, state.t, state.maturity, state.sigma_sq, n_obs, rng)
    g = rng.standard_normal(n_obs)
    tau = state.tau
    v = sk.integrated_variance
    dj = sk.total_jump
    disc = state.discount
    s0 = state.spot
    sig2 = state.sigma_sq
    denom = s0 * (sig2 + c_rho(levy))
    B = bcal(tau, levy.lam)
    drift = mu * tau + levy.rho * dj
    vz = v[:, None] + zn[None, :] * B
    wz = zw * np.expm1(levy.rho * zn)
    legs = (g, -g) if antithetic else (g,)

    cols_acc = None
    for gl in legs:
        st = s0 * np.exp(drift - 0.5 * v + np.sqrt(v) * gl)
        sz = s0 * np.exp(drift[:, None] - 0.5 * vz
                         + np.sqrt(vz) * gl[:, None] + levy.rho * zn[None, :])
        cols = []
        for K in strikes:
            call_t = np.maximum(st - K, 0.0)
            call_diff = np.maximum(sz - K, 0.0) - call_t[:, None]
            put_diff = np.maximum(K - sz, 0.0) - np.maximum(K - st, 0.0)[:, None]
            i1 = disc * np.where(st >= K, st, 0.0)
            i2 = disc * (call_diff @ wz)
            put_num = disc * (-sig2 * np.where(st < K, st, 0.0) + put_diff @ wz)
            cols += [i1, i2, disc * call_t, (sig2 * i1 + i2) / denom,
                     disc * np.maximum(K - st, 0.0), put_num / denom]
        cols.append(disc * st)
        cols.extend((disc * sz).T)
        if thetas.size:
            ph = np.exp(1j * np.log(st)[:, None] * thetas[None, :])
            cols.extend(ph.real.T)
            cols.extend(ph.imag.T)
        block = np.column_stack(cols)
        cols_acc = block if cols_acc is None else cols_acc + block
    return cols_acc / len(legs)


def run_battery(state: MarketState, levy: GammaOUParams, mu: float, strikes: Sequence[float],
                mc: McConfig | None = None, thetas: Sequence[float] = ()) -> McBattery:
    """Simulate once and evaluate every estimator on the same paths.

    Per strike: I1, I2, call price, LRM ratio, put price and the put LRM ratio
    built directly from the put-side representation. Also the martingale check
    ``disc * S_T``, the shifted legs ``disc * S_t exp(L^(z) + rho z)`` at each
    z node, and the empirical characteristic function of log S_T at ``thetas``.
    """
    mc = mc or McConfig()
    _check_gamma(levy)
    if state.tau <= 0:
        raise ModelError("need t < T")
    strikes = np.asarray(list(strikes), dtype=float)
    if np.any(strikes <= 0):
        raise ModelError("strikes must be positive")
    thetas = np.asarray(list(thetas), dtype=float)
    if mc.z_nodes is not None:
        zn, zw = (np.asarray(a, dtype=float) for a in mc.z_nodes)
    else:
        zn, zw = laguerre_z_nodes(levy, mc.n_z_nodes)

    per_obs = 2 if mc.antithetic else 1
    n_obs = mc.n_paths // per_obs
    obs_per_block = mc.block_size // per_obs
    sizes = [obs_per_block] * (n_obs // obs_per_block)
    if n_obs % obs_per_block:
        sizes.append(n_obs % obs_per_block)

    def work(b):
        rows = _block_observations(sizes[b], _block_rng(mc.seed, b), state, levy, mu,
                                   strikes, zn, zw, thetas, mc.antithetic)
        return _Stats.of(rows)

    n_threads = min(_n_threads(mc), len(sizes))
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(b) for b in range(len(sizes))]
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    est = total.estimates()

    hedges = []
    for j, K in enumerate(strikes):
        e = est[6 * j: 6 * j + 6]
        hedges.append(McHedgeEstimates(float(K), *e))
    pos = 6 * strikes.size
    martingale = est[pos]
    shifted = tuple(est[pos + 1: pos + 1 + zn.size])
    pos += 1 + zn.size
    k = thetas.size
    re, im = est[pos: pos + k], est[pos + k: pos + 2 * k]
    phi_vals = np.array([a.value + 1j * b.value for a, b in zip(re, im)])
    # SE of a complex mean: sqrt(Var Re + Var Im) / sqrt(n)
    phi_se = np.array([math.hypot(a.se, b.se) for a, b in zip(re, im)])

    battery = McBattery(mc.n_paths, tuple(hedges), martingale, shifted, zn, thetas,
                        phi_vals, phi_se)
    if mc.se_tolerance is not None:
        worst = max((h.xi.se for h in hedges), default=0.0)
        if worst > mc.se_tolerance:
            warnings.warn(f"xi standard error {worst:.3g} exceeds {mc.se_tolerance:.3g}; "
                          "increase n_paths", InsufficientPathsWarning, stacklevel=2)
    return battery


def mc_hedge_estimates(state: MarketState, levy: GammaOUParams, mu: float, K: float,
                       mc: McConfig | None = None) -> McHedgeEstimates:
    """MC estimates of I1, I2, price and xi for one strike (common random numbers over z)."""
    return run_battery(state, levy, mu, [K], mc).hedges[0]


def mc_put_lrm(state: MarketState, levy: GammaOUParams, mu: float, K: float,
               mc: McConfig | None = None) -> Estimate:
    """Put LRM ratio evaluated directly from the put-side representation (no parity)."""
    return run_battery(state, levy, mu, [K], mc).hedges[0].put_xi


def mc_characteristic_function(thetas: Sequence[float], state: MarketState,
                               levy: GammaOUParams, mu: float,
                               mc: McConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical E[exp(i theta log S_T)] and its standard errors."""
    b = run_battery(state, levy, mu, [], mc, thetas)
    return b.phi_values, b.phi_se


@dataclass(frozen=True)
class AuditReport:
    n_paths: int
    c_u: float
    max_u_ratio: float
    u_violations: int
    theta_violations: int
    nonpositive_variance: int
    n_jumps: int

    @property
    def passed(self) -> bool:
        return (self.u_violations == 0 and self.theta_violations == 0
                and self.nonpositive_variance == 0)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def path_bound_audit(paths: JumpSkeletons, levy: GammaOUParams, alpha: float,
                     n_grid: int = 100) -> AuditReport:
    """Check ``|u_s| <= C_u`` and ``theta_{s,x} < 1 - e^{rho x}`` along simulated paths.

    ``u_s = alpha sigma_s / (sigma_s^2 + C_rho)`` is evaluated on ``n_grid``
    times in [t, T] and just before every jump; ``theta_{s,x}`` at each jump
    (time s, mark x) uses the pre-jump variance.
    """
    c_u, _, _ = bound_constants(levy, paths.maturity, alpha)
    crho = c_rho(levy)
    lam = levy.lam
    owner = paths.owner
    n = paths.n_paths

    grid = np.linspace(paths.t, paths.maturity, n_grid)
    sig2_grid = np.empty((n, n_grid))
    for k, s in enumerate(grid):
        active = paths.times <= s
        contrib = np.where(active, paths.sizes * np.exp(-lam * np.where(active, s - paths.times, 0.0)), 0.0)
        sig2_grid[:, k] = (math.exp(-lam * (s - paths.t)) * paths.sigma_sq_t
                           + np.bincount(owner, contrib, minlength=n))

    # pre-jump variance at each jump time via per-path cumulative sums
    scaled = paths.sizes * np.exp(lam * (paths.times - paths.t))
    cs0 = np.concatenate([[0.0], np.cumsum(scaled)])
    starts = np.concatenate([[0], np.cumsum(paths.counts)[:-1]]).astype(int)
    before = cs0[:-1] - cs0[starts][owner]
    sig2_jump = np.exp(-lam * (paths.times - paths.t)) * (paths.sigma_sq_t + before)

    all_sig2 = np.concatenate([sig2_grid.ravel(), sig2_jump])
    bad_var = int(np.count_nonzero(~(all_sig2 > 0)))
    with np.errstate(invalid="ignore"):
        u = alpha * np.sqrt(all_sig2) / (all_sig2 + crho)
    u_abs = np.where(np.isfinite(u), np.abs(u), np.inf)
    slack = 1e-12 * max(c_u, 1e-300)
    u_viol = int(np.count_nonzero(u_abs > c_u + slack))
    max_ratio = float(u_abs.max() / c_u) if c_u > 0 and u_abs.size else float(u_abs.max(initial=0.0))

    one_minus = -np.expm1(levy.rho * paths.sizes)
    theta = alpha * (-one_minus) / (sig2_jump + crho)
    theta_viol = int(np.count_nonzero(~(theta < one_minus)))
    return AuditReport(n, c_u, max_ratio, u_viol, theta_viol, bad_var, int(paths.sizes.size))


# Skeleton dump: little-endian, header then counts (u4), times (f8), sizes (f8).
_MAGIC = b"BNSJ"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQdddd")


def dump_skeletons(fileobj, paths: JumpSkeletons) -> None:
    """Write skeletons in the versioned binary layout.

    Header (``<4sIQQdddd``, 48 bytes): magic ``BNSJ``, format version, number
    of paths, number of jumps, t, T, sigma_t^2, lambda.
    """
    fileobj.write(_HEADER.pack(_MAGIC, _VERSION, paths.n_paths, paths.sizes.size,
                               paths.t, paths.maturity, paths.sigma_sq_t, paths.lam))
    fileobj.write(np.asarray(paths.counts, dtype="<u4").tobytes())
    fileobj.write(np.asarray(paths.times, dtype="<f8").tobytes())
    fileobj.write(np.asarray(paths.sizes, dtype="<f8").tobytes())


def load_skeletons(fileobj) -> JumpSkeletons:
    raw = fileobj.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ModelError("truncated skeleton header")
    magic, version, n, m, t, T, s2, lam = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise ModelError("not a skeleton dump")
    if version != _VERSION:
        raise ModelError(f"unsupported skeleton dump version {version}")
    counts = np.frombuffer(fileobj.read(4 * n), dtype="<u4").astype(np.int64)
    times = np.frombuffer(fileobj.read(8 * m), dtype="<f8").copy()
    sizes = np.frombuffer(fileobj.read(8 * m), dtype="<f8").copy()
    if counts.size != n or times.size != m or sizes.size != m or int(counts.sum()) != m:
        raise ModelError("corrupt skeleton dump")
    return JumpSkeletons(t, T, s2, counts, times, sizes, lam)
