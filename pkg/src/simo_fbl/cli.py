"""simo-fbl: sweep blocklengths and emit rate curves as CSV, or run the
cross-validation checks.

Exit status: 0 ok, 2 bad configuration, 3 numerical failure, 4 a
verification check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import (
    LN2,
    BoundKind,
    InfeasibleError,
    achievability_csir,
    achievability_nocsi,
    converse_csirt,
    normal_approx_awgn,
    outage_capacity_nats,
)
from .config import NumericsConfig
from .fading import PointMassGain, RicianSimoGain
from .roots import BracketError
from .specfun import ConvergenceError, DomainError
from .stats import AngleMode, ChannelSpec, db_to_linear

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

CSV_COLUMNS = ("n", "bound", "rate_bits", "gamma", "residual", "runtime_ms", "status")
_KIND_ORDER = [BoundKind.OUTAGE, BoundKind.CONVERSE, BoundKind.CSIR, BoundKind.NOCSI, BoundKind.AWGN]

PRESETS = {
    "fig1": dict(snr_db=-1.55, epsilon=1e-3, k_db=20.0, num_rx=2, n_min=50, n_max=2000,
                 n_points=30, bounds=("outage-capacity", "converse-csirt", "achievability-csir",
                                      "achievability-nocsi", "normal-awgn")),
    # complex AWGN with C = 1 bit
    "awgn-ref": dict(snr_db=0.0, epsilon=1e-3, k_db=None, num_rx=1, n_min=100, n_max=4000,
                     n_points=40, bounds=("outage-capacity", "normal-awgn")),
    "small": dict(snr_db=0.0, epsilon=0.1, k_db=0.0, num_rx=1, n_min=10, n_max=100,
                  n_points=5, bounds=("outage-capacity", "converse-csirt", "achievability-csir",
                                      "achievability-nocsi")),
    "lemma1": dict(snr_db=0.0, epsilon=0.1, k_db=0.0, num_rx=1, n_min=100, n_max=10000,
                   n_points=3, bounds=("outage-capacity",)),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything a sweep or verification run needs.

    ``k_db=None`` selects a deterministic unit gain (AWGN). ``tau`` is a
    float, ``"1/n"`` or ``"auto"``.
    """

    snr_db: float = -1.55
    epsilon: float = 1e-3
    k_db: float | None = 20.0
    num_rx: int = 2
    n_min: int = 50
    n_max: int = 2000
    n_points: int = 30
    n_step: int | None = None
    bounds: tuple = ("outage-capacity", "converse-csirt", "achievability-csir",
                     "achievability-nocsi", "normal-awgn")
    tau: object = "1/n"
    angle_mode: str = "projection"
    mc_samples: int = 100_000
    seed: int = 20140101
    quad_nodes: int = 201
    output_path: str | None = None
    timing: bool = False
    workers: int | None = None
    z_threshold: float = 4.0
    preset: str = "fig1"
    kinds: tuple = field(init=False, default=())

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.num_rx < 1:
            raise ConfigError("--rx must be at least 1")
        if self.n_min < self.num_rx + 1:
            raise ConfigError(f"n_min must be at least num_rx + 1 = {self.num_rx + 1}")
        if self.n_max < self.n_min:
            raise ConfigError("n_max must be >= n_min")
        if self.n_points < 1 or (self.n_step is not None and self.n_step < 1):
            raise ConfigError("grid size must be positive")
        try:
            kinds = tuple(BoundKind(b) for b in self.bounds)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "kinds", tuple(k for k in _KIND_ORDER if k in kinds))
        try:
            AngleMode(self.angle_mode)
        except ValueError:
            raise ConfigError(f"unknown angle mode {self.angle_mode!r}") from None
        if isinstance(self.tau, float) and not (0.0 < self.tau < self.epsilon):
            raise ConfigError("tau must lie in (0, epsilon)")
        if not isinstance(self.tau, float) and self.tau not in ("1/n", "auto"):
            raise ConfigError("tau must be a number, '1/n' or 'auto'")
        try:
            self.numerics()
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def channel(self) -> ChannelSpec:
        if self.k_db is None:
            gain = PointMassGain(1.0, self.num_rx)
        else:
            gain = RicianSimoGain(db_to_linear(self.k_db), self.num_rx)
        return ChannelSpec(db_to_linear(self.snr_db), gain)

    def numerics(self) -> NumericsConfig:
        return NumericsConfig(quad_nodes=self.quad_nodes, mc_samples=self.mc_samples, seed=self.seed)

    def grid(self) -> list[int]:
        if self.n_step is not None:
            return list(range(self.n_min, self.n_max + 1, self.n_step))
        pts = np.rint(np.geomspace(self.n_min, self.n_max, self.n_points)).astype(int)
        return sorted(set(int(p) for p in pts))


def _tau_for(cfg: RunConfig, n: int):
    if cfg.tau == "1/n":
        return 1.0 / n
    return cfg.tau


def _best_tau(fn, epsilon):
    """Maximize fn(tau) over log tau in (log(eps/1e4), log(eps))."""
    def neg(lt):
        try:
            return -fn(math.exp(lt)).rate
        except (InfeasibleError, BracketError):
            return math.inf

    lo, hi = math.log(epsilon * 1e-4), math.log(epsilon * (1.0 - 1e-6))
    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-3})
    return fn(math.exp(res.x))


def evaluate_point(cfg: RunConfig, kind: BoundKind, n: int) -> dict:
    """One CSV row; failures are recorded in ``status`` instead of raised."""
    spec = cfg.channel()
    num = cfg.numerics()
    t0 = time.perf_counter()
    row = {"n": n, "bound": kind.value, "rate_bits": "", "gamma": "", "residual": "",
           "runtime_ms": "", "status": "ok"}
    try:
        if kind is BoundKind.OUTAGE:
            rate, gamma, resid, status = outage_capacity_nats(spec, cfg.epsilon) / LN2, None, 0.0, "ok"
        elif kind is BoundKind.AWGN:
            # AWGN channel with the same capacity as the outage capacity
            snr = math.expm1(outage_capacity_nats(spec, cfg.epsilon))
            rate, gamma, resid, status = normal_approx_awgn(snr, n, cfg.epsilon), None, 0.0, "ok"
        else:
            if kind is BoundKind.CONVERSE:
                # statistics of length n + 1 bound the rate at length n
                pt = converse_csirt(spec, n + 1, cfg.epsilon, num)
            else:
                if kind is BoundKind.CSIR:
                    fn = lambda tau: achievability_csir(spec, n, cfg.epsilon, tau, num)  # noqa: E731
                else:
                    fn = lambda tau: achievability_nocsi(spec, n, cfg.epsilon, tau,  # noqa: E731
                                                         cfg.angle_mode, num)
                tau = _tau_for(cfg, n)
                if tau == "auto":
                    pt = _best_tau(fn, cfg.epsilon)
                elif not tau < cfg.epsilon:
                    raise InfeasibleError(f"tau = {tau:.4g} is not below epsilon")
                else:
                    pt = fn(tau)
            rate, gamma, resid, status = pt.rate, pt.gamma, pt.residual, pt.status
        row.update(rate_bits=_fmt(rate), gamma=_fmt(gamma), residual=_fmt(resid, 3), status=status)
    except (InfeasibleError, BracketError) as exc:
        row["status"] = "infeasible: " + _clean(exc)
    except (ConvergenceError, ArithmeticError, DomainError) as exc:
        row["status"] = "error: " + _clean(exc)
    if cfg.timing:
        row["runtime_ms"] = f"{1e3 * (time.perf_counter() - t0):.1f}"
    return row


def _clean(exc):
    return str(exc).replace(",", ";").replace("\n", " ")


def _fmt(x, digits=12):
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}g}"


def _workers(cfg):
    if cfg.workers:
        return cfg.workers
    try:
        return max(1, int(os.environ.get("SIMO_FBL_WORKERS", "1")))
    except ValueError:
        return 1


def _eval_job(job):
    cfg, kind, n = job
    return evaluate_point(cfg, kind, n)


def sweep_rows(cfg: RunConfig) -> list[dict]:
    jobs = [(cfg, k, n) for n in cfg.grid() for k in cfg.kinds]
    w = _workers(cfg)
    if w > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=w) as pool:
            rows = list(pool.map(_eval_job, jobs, chunksize=1))
    else:
        rows = [_eval_job(j) for j in jobs]
    # pool.map preserves submission order; sort anyway to pin the contract
    order = {k.value: i for i, k in enumerate(_KIND_ORDER)}
    return sorted(rows, key=lambda r: (r["n"], order[r["bound"]]))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def crossing(ns, rates, level):
    """Smallest n with rate >= level, interpolating linearly between grid points.

    Returns (n, interpolated). ``interpolated`` is False when the first
    valid point on the curve is already at or above ``level``, in which case
    n is only an upper estimate. Returns (None, False) if the level is never
    reached.
    """
    prev = None
    for n, r in zip(ns, rates):
        if r is None or not math.isfinite(r):
            prev = None
            continue
        if r >= level:
            if prev is None:
                return float(n), False
            n0, r0 = prev
            return n0 + (level - r0) * (n - n0) / (r - r0), True
        prev = (n, r)
    return None, False


def summarize(cfg: RunConfig, rows, level_fraction: float = 0.9) -> dict:
    c_bits = outage_capacity_nats(cfg.channel(), cfg.epsilon) / LN2
    out = {"c_eps_bits": c_bits, "crossings": {}}
    for kind in cfg.kinds:
        if kind is BoundKind.OUTAGE:
            continue
        sel = [r for r in rows if r["bound"] == kind.value]
        ns = [r["n"] for r in sel]
        rates = [float(r["rate_bits"]) if r["rate_bits"] not in ("", "inf") else None for r in sel]
        out["crossings"][kind.value] = crossing(ns, rates, level_fraction * c_bits)
    return out


def format_summary(summary) -> str:
    lines = [f"# C_eps_bits={summary['c_eps_bits']:.6f}"]
    for kind, (n, interp) in summary["crossings"].items():
        if n is None:
            val = "none"
        else:
            val = f"{n:.1f}" + ("" if interp else " (first valid grid point already above)")
        lines.append(f"# n90[{kind}]={val}")
    return "\n".join(lines) + "\n"


def run_sweep(cfg: RunConfig) -> tuple[str, dict]:
    """CSV text and summary for a sweep; writes ``cfg.output_path`` if set."""
    rows = sweep_rows(cfg)
    text = rows_to_csv(rows)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text, summarize(cfg, rows)


# ---------------------------------------------------------------------------
# verification


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        return (f"{self.name},{self.measured:.6g},{self.tolerance:.6g},"
                f"{'pass' if self.passed else 'fail'}")


def _small_checks(cfg: RunConfig) -> list[Check]:
    from .bounds import outage_capacity
    from .oracle import McConfig, mc_error_probability_of_threshold_code, mc_prob_S_le
    from .oracle import mc_prob_L_ge, mc_prob_angle_ge
    from .specfun import regularized_incomplete_beta
    from .stats import prob_angle_ge, prob_L_ge, prob_S_le

    spec = cfg.channel()
    num = cfg.numerics()
    mc = McConfig(cfg.mc_samples, cfg.seed)
    z = cfg.z_threshold
    checks = []
    c = outage_capacity_nats(spec, cfg.epsilon)
    for n in (10, 40):
        for off in (-0.1, 0.0, 0.1):
            g = c + off
            pairs = [("S", prob_S_le(spec, n, g, num), mc_prob_S_le(spec, n, g, mc)),
                     ("L", prob_L_ge(spec, n, g - 0.3, num), mc_prob_L_ge(spec, n, g - 0.3, mc))]
            g01 = math.exp(-g)
            pairs.append(("angle", prob_angle_ge(spec, n, g01, AngleMode.PROJECTION, num),
                          mc_prob_angle_ge(spec, n, g01, mc, statistic="relaxed")))
            for name, p, est in pairs:
                zs = est.z_score(p)
                checks.append(Check(f"{name}[n={n};gamma={g:.4f}]", zs, z, zs < z))
    r = spec.num_rx
    for n in (10, 30):
        for q in (0.5, 0.7, 0.9):
            est = mc_error_probability_of_threshold_code(spec, n, q, mc)
            zs = est.z_score(regularized_incomplete_beta(q, n - r, r))
            checks.append(Check(f"beta[n={n};gamma={q}]", zs, z, zs < z))
    cb = outage_capacity(spec, cfg.epsilon)
    checks.append(Check("outage_positive", cb, 0.0, cb > 0))
    return checks


def _lemma1_checks(cfg: RunConfig) -> list[Check]:
    from .asymptotics import verify_lemma1
    from .oracle import McConfig

    rep = verify_lemma1(n_grid=cfg.grid(), mc=McConfig(cfg.mc_samples, cfg.seed))
    checks = [Check(f"lemma1[n={n}]", v, s, True)
              for n, v, s in zip(rep.n_grid, rep.normalized, rep.stderr)]
    bound = 10.0 * rep.median
    checks.append(Check("lemma1_final_vs_median", rep.final, bound,
                        rep.status == "pass" and rep.final < bound))
    return checks


def run_verify(cfg: RunConfig) -> tuple[list[Check], bool]:
    checks = _lemma1_checks(cfg) if cfg.preset == "lemma1" else _small_checks(cfg)
    return checks, all(c.passed for c in checks)


# ---------------------------------------------------------------------------
# argument parsing


def _tau_arg(text):
    if text in ("1/n", "auto"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number, '1/n' or 'auto'") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simo-fbl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("sweep", "verify"):
        s = sub.add_parser(name)
        s.add_argument("--preset", choices=sorted(PRESETS), default="fig1" if name == "sweep" else "small")
        s.add_argument("--snr-db", type=float)
        s.add_argument("--epsilon", type=float)
        s.add_argument("--k-db", type=float, help="Rician K-factor in dB (omit with --awgn)")
        s.add_argument("--awgn", action="store_true", help="deterministic unit gain")
        s.add_argument("--rx", type=int, dest="num_rx")
        s.add_argument("--n-min", type=int)
        s.add_argument("--n-max", type=int)
        s.add_argument("--n-points", type=int)
        s.add_argument("--n-step", type=int)
        s.add_argument("--bound", help="comma-separated bound kinds")
        s.add_argument("--tau", type=_tau_arg)
        s.add_argument("--angle-mode", choices=[m.value for m in AngleMode])
        s.add_argument("--mc-samples", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--quad-nodes", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--out", dest="output_path")
        s.add_argument("--timing", action="store_true", help="fill runtime_ms (breaks byte identity)")
        s.add_argument("--z-threshold", type=float)
    return p


def config_from_args(args) -> RunConfig:
    base = dict(PRESETS[args.preset])
    base["preset"] = args.preset
    if args.command == "verify" and args.preset == "small":
        base["mc_samples"] = 200_000
    if args.command == "verify" and args.preset == "lemma1":
        base["mc_samples"] = 10 ** 6
    for key in ("snr_db", "epsilon", "k_db", "num_rx", "n_min", "n_max", "n_points", "n_step",
                "tau", "angle_mode", "mc_samples", "seed", "quad_nodes", "workers",
                "output_path", "z_threshold"):
        v = getattr(args, key)
        if v is not None:
            base[key] = v
    if args.awgn:
        base["k_db"] = None
    if args.bound:
        base["bounds"] = tuple(b.strip() for b in args.bound.split(",") if b.strip())
    base["timing"] = args.timing
    return RunConfig(**base)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            text, summary = run_sweep(cfg)
            if not cfg.output_path:
                sys.stdout.write(text)
            sys.stderr.write(format_summary(summary))
            return EXIT_OK
        checks, ok = run_verify(cfg)
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write("check,measured,tolerance,result\n")
    for c in checks:
        sys.stdout.write(c.line() + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
