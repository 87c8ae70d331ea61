"""Command-line entry points.

Exit codes: 0 success, 2 attempts exhausted, 3 rejected input,
4 resource guard.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from datetime import timedelta
from typing import Optional

import numpy as np

from . import collisions, diffusion, factor
from .errors import AttemptsExhausted, NonInvertible, OutOfOracleRange, ResourceGuard
from .ntheory import Modulus, order_oracle

EXIT_OK, EXIT_EXHAUSTED, EXIT_REJECTED, EXIT_GUARD = 0, 2, 3, 4

ZETA_VALUES = {2: 6 / math.pi**2, 3: 0.8319073725807075, 4: 90 / math.pi**4}


@dataclass
class RunConfig:
    command: str
    N: Optional[int] = None
    b: Optional[int] = None
    L: int = collisions.DEFAULT_L
    max_samples: int = collisions.DEFAULT_MAX_SAMPLES
    stable_hits: int = collisions.DEFAULT_STABLE_HITS
    max_attempts: int = 80
    seed: Optional[int] = None
    aggressive: bool = False
    workers: int = 1
    output: str = "text"
    out_path: Optional[str] = None
    timing: bool = True

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        return cls(
            command=args.command, N=getattr(args, "N", None), b=getattr(args, "b", None), L=args.L,
            max_samples=args.max_samples, stable_hits=args.stable_hits, max_attempts=args.max_attempts,
            seed=args.seed, aggressive=args.aggressive, workers=args.workers, output=args.output,
            out_path=args.out_path, timing=args.timing,
        )


def format_total_time(seconds: float) -> str:
    return f"TOTAL TIME: {seconds:.3f} s  ({timedelta(seconds=round(seconds))})"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (u64)")
    p.add_argument("--word-length", dest="L", type=int, default=collisions.DEFAULT_L)
    p.add_argument("--max-samples", type=int, default=collisions.DEFAULT_MAX_SAMPLES)
    p.add_argument("--stable-hits", type=int, default=collisions.DEFAULT_STABLE_HITS)
    p.add_argument("--max-attempts", type=int, default=80)
    p.add_argument("--aggressive", action="store_true", help="try a factor from every single collision")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out", dest="out_path", default=None, metavar="PATH")
    p.add_argument("--no-timing", dest="timing", action="store_false", help="omit the TOTAL TIME line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatfactor", description="Diffusion-assisted factoring at desk scale")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", help="factor N with the restart loop")
    p.add_argument("N", type=int)
    p.add_argument("--order-source", choices=factor.ORDER_SOURCES, default="collision")
    p.add_argument("--base", dest="b", type=int, default=None, help="force the first trial's base a")
    p.add_argument("--max-support", type=int, default=2_000_000)
    _common(p)

    p = sub.add_parser("order-diffusion", help="recover ord_N(b) from the heat readout p_n(e)")
    p.add_argument("N", type=int)
    p.add_argument("b", type=int)
    p.add_argument("--steps", type=int, default=None, help="defaults to the guaranteed step count")
    p.add_argument("--max-support", type=int, default=2_000_000)
    _common(p)

    p = sub.add_parser("order-collision", help="recover ord_N(a) from word collisions")
    p.add_argument("N", type=int)
    p.add_argument("--base", dest="b", type=int, default=None)
    _common(p)

    p = sub.add_parser("stats-birthday", help="observed vs expected colliding pairs")
    p.add_argument("N", type=int, nargs="?", default=299)
    p.add_argument("b", type=int, nargs="?", default=3)
    p.add_argument("--T", type=int, default=40)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--t", dest="t", type=int, default=None, help="walk length (default: guaranteed step count)")
    _common(p)

    p = sub.add_parser("stats-zeta", help="gcd-1 frequency vs 1/zeta(s)")
    p.add_argument("--s", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--Q", type=int, default=10**6)
    p.add_argument("--trials", type=int, default=10**5)
    _common(p)

    p = sub.add_parser("rc-demo", help="RC triangle: exact vs first-order sampling error")
    p.add_argument("--ohms", type=float, default=1e3)
    p.add_argument("--farads", type=float, default=1e-6)
    _common(p)
    return parser


@contextlib.contextmanager
def _sink(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(args, text: str) -> None:
    with _sink(args.out_path) as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


TRIAL_COLUMNS = ("attempt", "a", "outcome", "reason", "d", "r", "collisions")


def _write_trials(fh, report: factor.FactorReport) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for o in report.outcomes:
        w.writerow([o.attempt, o.a, o.kind, o.reason, o.d or "", o.details.get("r_a", ""), len(o.collisions)])


def _dump_report(fh, args, report: factor.FactorReport) -> None:
    if args.output == "csv":
        _write_trials(fh, report)
        return
    data = report.to_json()
    if not args.timing:
        data.pop("elapsed_s")
    json.dump(data, fh, indent=2)
    fh.write("\n")


def cmd_factor(args) -> int:
    N = args.N
    check = factor.pre_check(N)
    if check.kind != "Composite":
        print(f"rejected: N = {N} is {check}", file=sys.stderr)
        return EXIT_REJECTED
    cfg = factor.FactorConfig(
        order_source=args.order_source, max_attempts=args.max_attempts, seed=args.seed, L=args.L,
        max_samples=args.max_samples, stable_hits=args.stable_hits, aggressive=args.aggressive,
        max_support=args.max_support, workers=args.workers,
    )
    text = args.output == "text"
    with _sink(args.out_path) as fh:
        log = (lambda line: print(line, file=fh, flush=True)) if text else (lambda line: None)
        start = time.perf_counter()
        try:
            report = factor.algorithm1(N, cfg, log=log, base=args.b)
        except AttemptsExhausted as exc:
            if text:
                print(f"FAILED: no factor of {N} after {exc.attempts} attempts", file=fh)
            else:
                _dump_report(fh, args, exc.report)
            return EXIT_EXHAUSTED
        except ResourceGuard as exc:
            print(f"resource guard: {exc}", file=sys.stderr)
            return EXIT_GUARD
        elapsed = time.perf_counter() - start
        if text:
            d1, d2 = report.factors
            print("", file=fh)
            print(f"FINAL: {N} = {d1} * {d2}", file=fh)
            if args.timing:
                print(format_total_time(elapsed), file=fh)
        else:
            _dump_report(fh, args, report)
    return EXIT_OK


def cmd_order_diffusion(args) -> int:
    mod = Modulus.of(args.N)
    try:
        walk = diffusion.build_walk(mod, args.b)
    except NonInvertible as exc:
        print(f"rejected: gcd(b, N) = {exc.gcd}", file=sys.stderr)
        return EXIT_REJECTED
    if mod.N <= 2**48:
        try:
            r_known = order_oracle(args.b, mod)
        except OutOfOracleRange:
            r_known = None
        if r_known is not None and r_known > args.max_support:
            print(f"resource guard: ord_N(b) = {r_known} exceeds --max-support {args.max_support}", file=sys.stderr)
            return EXIT_GUARD
    n0 = diffusion.required_steps(mod) if args.steps is None else args.steps
    try:
        p_e = diffusion.heat_series(walk, n0, max_support=args.max_support)
    except ResourceGuard as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    r = diffusion.read_order(p_e[-1], n0)
    verified = pow(walk.b, r, mod.N) == 1
    rounded = np.floor(1.0 / p_e + 0.5).astype(np.int64)
    since = diffusion.stable_from(rounded, r)
    summary = f"r = {r}  stable_from_n = {since}  n0 = {n0}  verified = {verified}"
    if args.output == "csv":
        with _sink(args.out_path) as fh:
            diffusion.write_series_csv(fh, p_e)
        print(summary, file=sys.stderr if args.out_path is None else sys.stdout)
    elif args.output == "json":
        _emit(args, json.dumps({"N": mod.N, "b": walk.b, "n0": n0, "r": r, "stable_from": since, "verified": verified}, indent=2))
    else:
        _emit(args, summary)
    return EXIT_OK if verified else EXIT_EXHAUSTED


def cmd_order_collision(args) -> int:
    mod = Modulus.of(args.N)
    rng = np.random.default_rng(args.seed)
    a = args.b if args.b is not None else factor.uniform_base(rng, mod.N)
    lines: list[str] = []
    start = time.perf_counter()
    try:
        res = collisions.collision_attempt(
            a, mod, rng, L=args.L, max_samples=args.max_samples, stable_hits=args.stable_hits,
            aggressive=args.aggressive, log=lines.append,
        )
    except NonInvertible as exc:
        print(f"rejected: gcd(a, N) = {exc.gcd}", file=sys.stderr)
        return EXIT_REJECTED
    elapsed = time.perf_counter() - start
    if args.output == "json":
        data = {
            "attempt": 1, "a": res.a,
            "collisions": [{"D": c.D, "D_min": c.D_min, "g": g} for c, g in zip(res.certificates, res.gcds)],
            "r": res.r, "factors": list(res.factors) if res.factors else None,
        }
        if args.timing:
            data["elapsed_s"] = elapsed
        _emit(args, json.dumps(data, indent=2))
    else:
        lines.insert(0, f"[attempt 1] trying a = {res.a}")
        if args.timing:
            lines.append(format_total_time(elapsed))
        _emit(args, "\n".join(lines))
    return EXIT_OK if res.status != "no_stabilization" else EXIT_EXHAUSTED


def cmd_stats_birthday(args) -> int:
    mod = Modulus.of(args.N)
    r = order_oracle(args.b, mod)
    t = diffusion.required_steps(mod) if args.t is None else args.t
    rng = np.random.default_rng(args.seed)
    res = collisions.birthday_experiment(mod, args.b, t, args.T, args.reps, r, rng)
    rel = (res.mean_pairs - res.expected_uniform) / res.expected_uniform if res.expected_uniform else float("nan")
    if args.output == "json":
        _emit(args, json.dumps({
            "N": mod.N, "b": args.b, "r": r, "T": res.T, "t": t, "reps": res.reps,
            "observed_mean_pairs": res.mean_pairs, "expected_exact": res.expected_exact,
            "expected_uniform": res.expected_uniform, "relative_error": rel,
        }, indent=2))
    else:
        _emit(args, "\n".join([
            f"N = {mod.N}  b = {args.b}  r = {r}  T = {res.T}  t = {t}  reps = {res.reps}",
            f"observed mean pairs   {res.mean_pairs:.4f}",
            f"expected (s2(t))      {res.expected_exact:.4f}",
            f"expected T(T-1)/2r    {res.expected_uniform:.4f}",
            f"relative error        {rel:+.4f}",
        ]))
    return EXIT_OK


def cmd_stats_zeta(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = []
    for s in args.s:
        freq = collisions.zeta_gcd_experiment(s, args.Q, args.trials, rng)
        target = ZETA_VALUES.get(s)
        if target is None:
            from scipy.special import zeta

            target = 1 / float(zeta(s))
        sigma = math.sqrt(target * (1 - target) / args.trials)
        rows.append({"s": s, "frequency": freq, "inv_zeta": target, "sigma": sigma, "z": (freq - target) / sigma})
    if args.output == "json":
        _emit(args, json.dumps(rows, indent=2))
    else:
        lines = [f"{'s':>3} {'frequency':>10} {'1/zeta(s)':>10} {'sigma':>9} {'z':>7}"]
        lines += [f"{r['s']:>3} {r['frequency']:>10.5f} {r['inv_zeta']:>10.5f} {r['sigma']:>9.2e} {r['z']:>7.2f}" for r in rows]
        _emit(args, "\n".join(lines))
    return EXIT_OK


def cmd_rc_demo(args) -> int:
    net = diffusion.triangle_network(args.ohms, args.farads)
    rc = args.ohms * args.farads
    gammas = [1e-1, 1e-2, 1e-3, 1e-4]
    # gamma is dt/(RC), so (dt/C) L equals gamma times the unit-conductance Laplacian
    errors = [diffusion.discretization_error(net, g * rc) for g in gammas]
    slope = diffusion.loglog_slope(gammas, errors)
    if args.output == "json":
        _emit(args, json.dumps({"gamma": gammas, "error": errors, "slope": slope}, indent=2))
    elif args.output == "csv":
        _emit(args, "gamma,error\n" + "\n".join(f"{g!r},{e!r}" for g, e in zip(gammas, errors)))
    else:
        lines = [f"gamma = {g:.0e}   ||exp(-gamma L) - (I - gamma L)||_2 = {e:.6e}" for g, e in zip(gammas, errors)]
        lines.append(f"log-log slope = {slope:.4f}")
        _emit(args, "\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "factor": cmd_factor,
    "order-diffusion": cmd_order_diffusion,
    "order-collision": cmd_order_collision,
    "stats-birthday": cmd_stats_birthday,
    "stats-zeta": cmd_stats_zeta,
    "rc-demo": cmd_rc_demo,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig.from_args(args)
    if cfg.max_attempts < 1 or cfg.L < 1 or cfg.max_samples < 1 or cfg.workers < 1:
        parser.error("--max-attempts, --word-length, --max-samples and --workers must be positive")
    try:
        return COMMANDS[args.command](args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not an error here
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
