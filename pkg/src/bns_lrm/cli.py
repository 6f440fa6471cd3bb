"""Command line interface: ``bns-lrm {validate,hedge,sweep,mc-check}``.

Exit codes: 0 success, 1 assumption / pricing / Monte Carlo failure,
2 bad input (parse errors, malformed config, invalid strike, empty grid,
unsupported model for the command).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from . import pricer, simulate, strategy
from .charfn import DampingConfig, damping_feasible, phi
from .model import (
    AssumptionError,
    CapabilityError,
    GammaOUParams,
    MarketState,
    ModelError,
    bcal,
    check_variance_floor,
    martingale_drift,
    model_constants,
    params_from_dict,
    validate_assumptions,
)
from .quadrature import QuadratureError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FIGURE_STRIKES = (900.0, 1124.47, 1300.0)
MC_THETAS = tuple(float(x) for x in np.round(np.linspace(0.1, 50.0, 20), 10))
LOW_POWER_PATHS = 10_000
Z_LIMIT = 3.0
# a shifted leg is a lognormal mean with log-variance >= v_min; its sample SE
# is only trusted when n_paths >= TAIL_FACTOR * exp(v_min)
TAIL_FACTOR = 1000.0


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything one invocation needs; serialises to and from JSON losslessly."""

    command: str = "validate"
    params: dict = field(default_factory=lambda: {"preset": "Scho-Gamma"})
    spot: float = 1124.47
    sigma_sq: float | None = None
    t: float = 0.0
    maturity: float = 1.0
    r: float = 0.019
    q: float = 0.012
    K: float | None = None
    alpha_damp: float = 1.75
    paths: int = 200_000
    seed: int = 42
    format: str = "csv"
    out: str | None = None
    paper_figures: bool = False
    force: bool = False
    sweep: dict | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed JSON config: {exc}") from None
        return cls.from_dict(data)

    def levy(self):
        return params_from_dict(self.params)

    def state(self, levy) -> MarketState:
        s2 = levy.sigma0_sq if self.sigma_sq is None else self.sigma_sq
        return MarketState(self.spot, s2, self.t, self.maturity, self.r, self.q)


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (stop inclusive) or a comma separated list."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise UsageError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 12) for k in range(max(n, 0)))
    return tuple(float(p) for p in text.split(",") if p.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bns-lrm",
                                description="LRM and delta hedging under Gamma-OU BNS dynamics")
    p.add_argument("command", choices=["validate", "hedge", "sweep", "mc-check"])
    p.add_argument("--preset", help="parameter preset, e.g. Scho-Gamma")
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--K", type=float, help="strike (hedge; fixed strike of a time sweep)")
    p.add_argument("--t", type=float, help="evaluation time (fixed t of a strike sweep)")
    p.add_argument("--T", type=float, dest="maturity", help="maturity")
    p.add_argument("--S", type=float, dest="spot", help="spot at time t")
    p.add_argument("--sigma-sq", type=float, dest="sigma_sq",
                   help="squared volatility at time t (default: preset sigma0^2)")
    p.add_argument("--r", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--alpha-damp", type=float, dest="alpha_damp", help="damping (default 1.75)")
    p.add_argument("--paths", type=int, help="Monte Carlo paths (mc-check)")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", help="output file (directory with --paper-figures)")
    p.add_argument("--paper-figures", action="store_true", default=None, dest="paper_figures")
    p.add_argument("--mode", choices=["time", "strike"], help="sweep mode")
    p.add_argument("--grid", help="sweep grid: start:stop:step or comma list")
    p.add_argument("--force", action="store_true", default=None,
                   help="proceed even if assumptions fail")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = RunConfig.from_json(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    else:
        cfg = RunConfig()
    cfg.command = args.command
    if args.preset:
        cfg.params = {"preset": args.preset}
    for name in ("K", "t", "maturity", "spot", "sigma_sq", "r", "q", "alpha_damp", "paths",
                 "seed", "format", "out", "paper_figures", "force"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.mode or args.grid is not None:
        if not (args.mode and args.grid is not None):
            raise UsageError("--mode and --grid go together")
        fixed = cfg.K if args.mode == "time" else cfg.t
        if fixed is None:
            raise UsageError("a time sweep needs --K")
        cfg.sweep = {"mode": args.mode, "fixed": fixed, "grid": list(parse_grid(args.grid))}
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_validate(cfg: RunConfig) -> int:
    levy = cfg.levy()
    state = cfg.state(levy)
    mu = martingale_drift(levy, cfg.r, cfg.q)
    report = validate_assumptions(levy, cfg.maturity, mu)
    out: dict[str, Any] = {"model": levy.to_dict(), "assumptions": report.to_dict()}
    ok = report.ok
    try:
        out["constants"] = model_constants(levy, cfg.maturity, mu).to_dict()
    except AssumptionError:
        out["constants"] = None
    if isinstance(levy, GammaOUParams) and state.tau > 0:
        d = damping_feasible(cfg.alpha_damp, state, levy).to_dict()
        out["damping"] = d
        ok = ok and d["feasible"]
    else:
        out["damping"] = None
    if cfg.format == "json":
        _emit(_dumps(out), cfg.out)
    else:
        lines = [f"model: {levy.family} {json.dumps(levy.to_dict(), sort_keys=True)}"]
        for c in report.checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        if out["damping"] is None:
            lines.append("damping: not applicable")
        else:
            d = out["damping"]
            lines.append(f"{'PASS' if d['feasible'] else 'FAIL'} damping alpha={d['alpha_damp']}: "
                         f"moment ({d['moment_lower']:.6g}, {d['moment_upper']:.6g}), "
                         f"sufficient (0, {d['sufficient_upper']:.6g}), "
                         f"call contour {d['call_contour']}")
        if out["constants"]:
            lines += [f"{k} = {v!r}" for k, v in out["constants"].items()]
        _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK if ok else EXIT_FAIL


def _prepare(cfg: RunConfig, need_gamma: bool = True):
    levy = cfg.levy()
    if need_gamma and not isinstance(levy, GammaOUParams):
        raise CapabilityError(f"{cfg.command} is only available for gamma-ou, not {levy.family}")
    state = cfg.state(levy)
    mu = martingale_drift(levy, cfg.r, cfg.q)
    validate_assumptions(levy, cfg.maturity, mu).require(cfg.force)
    check_variance_floor(state, levy, override=cfg.force)
    return levy, state, mu


HEDGE_COLUMNS = ("strike",) + strategy.CSV_COLUMNS[1:] + ("xi_put", "delta_put")


def cmd_hedge(cfg: RunConfig) -> int:
    if cfg.K is None or not cfg.K > 0 or not math.isfinite(cfg.K):
        raise UsageError(f"strike must be positive, got {cfg.K}")
    levy, state, mu = _prepare(cfg)
    res = pricer.hedge(state, levy, mu, cfg.K, DampingConfig(cfg.alpha_damp))
    row = {"strike": res.strike, "xi": res.xi, "delta": res.delta, "price": res.price,
           "i1": res.i1, "i2": res.i2, "quad_err_i1": res.quad_err_i1,
           "quad_err_i2": res.quad_err_i2, "xi_put": res.xi - 1.0, "delta_put": res.delta - 1.0}
    if cfg.format == "json":
        diag = {k: v for k, v in res.diagnostics.items()}
        _emit(_dumps({**row, "diagnostics": diag}), cfg.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEDGE_COLUMNS)
        w.writerow([repr(float(row[c])) for c in HEDGE_COLUMNS])
        _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def _table_text(table: strategy.SweepTable, fmt: str) -> str:
    return table.to_json() if fmt == "json" else table.to_csv()


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.paper_figures:
        if cfg.sweep is None:
            raise UsageError("sweep needs --mode/--grid, a config 'sweep' block or --paper-figures")
        if not cfg.sweep.get("grid"):
            raise UsageError("sweep grid is empty")
        try:
            spec = strategy.SweepSpec.from_dict(cfg.sweep)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad sweep block: {exc}") from None
        if spec.mode == "time" and max(spec.grid) >= cfg.maturity:
            raise UsageError("time grid must lie in [0, T)")
    levy, state, mu = _prepare(cfg)
    damping = DampingConfig(cfg.alpha_damp)
    threads = simulate._n_threads(simulate.McConfig())
    if cfg.paper_figures:
        tables = strategy.figure_sweeps(state, levy, mu, damping, force=cfg.force,
                                              threads=threads)
        outdir = cfg.out or "."
        os.makedirs(outdir, exist_ok=True)
        ext = "json" if cfg.format == "json" else "csv"
        for name, tb in tables.items():
            _emit(_table_text(tb, cfg.format), os.path.join(outdir, f"{name}.{ext}"))
        rows = [r for tb in tables.values() for r in tb.rows]
    else:
        tb = strategy.sweep(spec, state, levy, mu, damping, force=cfg.force, threads=threads)
        _emit(_table_text(tb, cfg.format), cfg.out)
        rows = tb.rows
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"row {r.grid_value!r} failed: {r.error}", file=sys.stderr)
    return EXIT_OK if len(rows) - len(failed) >= 0.99 * len(rows) else EXIT_FAIL


def mc_check_report(cfg: RunConfig) -> tuple[list[tuple[str, float, float, float, bool]], dict]:
    """Run the Fourier-vs-MC battery.

    Returns rows ``(name, reference, mc, z, counted)`` and metadata. Rows with
    ``counted=False`` are shifted legs whose heavy lognormal tail makes the
    sample standard error unreliable at this path count; they are reported but
    do not decide the exit status.
    """
    levy, state, mu = _prepare(cfg)
    strikes = (cfg.K,) if cfg.K is not None else FIGURE_STRIKES
    if any(not k > 0 for k in strikes):
        raise UsageError("strikes must be positive")
    mc = simulate.McConfig(n_paths=cfg.paths, seed=cfg.seed)
    battery = simulate.run_battery(state, levy, mu, strikes, mc, MC_THETAS)
    damping = DampingConfig(cfg.alpha_damp)
    rows: list[tuple[str, float, float, float, bool]] = []

    ref = phi(np.asarray(MC_THETAS), state, levy, mu)
    for th, ph, se, val in zip(MC_THETAS, battery.phi_values, battery.phi_se, ref):
        z = abs(ph - val) / se if se > 0 else (0.0 if ph == val else math.inf)
        rows.append((f"phi[theta={th:g}]", abs(val), abs(ph), z, True))
    rows.append(("martingale", state.spot, battery.martingale.value,
                 battery.martingale.zscore(state.spot), True))
    B = bcal(state.tau, levy.lam)
    for zn, leg in zip(battery.z_nodes, battery.shifted_legs):
        target = state.spot * math.exp(levy.rho * zn)
        v_min = (state.sigma_sq + zn) * B
        counted = cfg.paths >= TAIL_FACTOR * math.exp(v_min)
        rows.append((f"shifted_leg[z={zn:.6g}]", target, leg.value, leg.zscore(target), counted))
    for h in battery.hedges:
        f = pricer.hedge(state, levy, mu, h.strike, damping)
        for name in ("i1", "i2", "price", "xi"):
            est = getattr(h, name)
            ref_v = getattr(f, name)
            rows.append((f"{name}[K={h.strike:g}]", ref_v, est.value, est.zscore(ref_v), True))
        rows.append((f"put_xi+1[K={h.strike:g}]", f.xi, h.put_xi.value + 1.0,
                     h.put_xi.zscore(f.xi - 1.0), True))
    meta = {"n_paths": cfg.paths, "seed": cfg.seed, "low_power": cfg.paths < LOW_POWER_PATHS}
    return rows, meta


def cmd_mc_check(cfg: RunConfig) -> int:
    rows, meta = mc_check_report(cfg)
    counted = [z for *_, z, c in rows if c]
    ok = all(abs(z) <= Z_LIMIT for z in counted)
    worst = max(abs(z) for z in counted)
    if cfg.format == "json":
        payload = {**meta, "passed": ok, "max_abs_z": worst,
                   "checks": [{"name": n, "reference": a, "mc": b, "z": z, "counted": c}
                              for n, a, b, z, c in rows]}
        _emit(_dumps(payload), cfg.out)
    else:
        lines = [f"n_paths={meta['n_paths']} seed={meta['seed']}"]
        if meta["low_power"]:
            lines.append(f"WARNING low power: fewer than {LOW_POWER_PATHS} paths, "
                         "standard errors are large")
        for n, a, b, z, c in rows:
            tag = "" if c else "  (heavy tail, not counted)"
            lines.append(f"{n:<28} reference={a:<24.16g} mc={b:<24.16g} z={z:+.4f}{tag}")
        lines.append(f"{'PASS' if ok else 'FAIL'} max|z|={worst:.4f} limit={Z_LIMIT}")
        _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"validate": cmd_validate, "hedge": cmd_hedge, "sweep": cmd_sweep,
            "mc-check": cmd_mc_check}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, CapabilityError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssumptionError as exc:
        print(f"error: {exc} (use --force to override)", file=sys.stderr)
        return EXIT_FAIL
    except pricer.DampingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ModelError as exc:
        # parameter and state validation problems are input errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
