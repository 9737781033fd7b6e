"""Command-line front end: ``jigsaw {run,sweep,pc,grow,theory,render,selftest}``.

Exit status 0 on success, 1 on usage errors, 2 on runtime or convergence
failures.  All randomness derives from ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from .engine.dynamics import DynamicsParams, JigsawProcess, UsageError
from .io import (ExperimentConfig, PcBlock, artifact_version, format_csv, parse_grid,
                 render_snapshot, write_summary)
from .montecarlo import (BracketError, McConfig, coupled_sweep, default_parallelism, estimate_pc,
                         estimate_solve)
from .randomness import EdgeSampler, parse_seed, trial_seed
from .topology import TopologyError, parse_topology
from .theory.quadrature import ConvergenceError

COMMANDS = ("run", "sweep", "pc", "grow", "theory", "render", "selftest")
CONSTANTS = ("lambda", "nu", "lb2d", "ub2d", "phi")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _theta(text: str):
    if text == "inf":
        return "inf"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('theta must be an integer or "inf"') from None


def _seed(text: str) -> int:
    try:
        return parse_seed(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so that config-file values survive unless overridden
    p.add_argument("--config", help="JSON experiment config; flags override its keys")
    p.add_argument("--topology")
    p.add_argument("--sigma", type=int)
    p.add_argument("--tau", type=int)
    p.add_argument("--theta", type=_theta)
    p.add_argument("--rule", choices=("threshold", "basic"))
    p.add_argument("--p", type=float)
    p.add_argument("--p-grid", dest="p_grid", metavar="A:B:STEP")
    p.add_argument("--pc", action="store_true", help="search for the 1/2 crossing of P(Solve)")
    p.add_argument("--pc-tol", type=float)
    p.add_argument("--pc-trials", type=int, help="base trials per bisection level")
    p.add_argument("--pc-lo", type=float)
    p.add_argument("--pc-hi", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--out", help="output path (CSV for run/sweep; JSON summary written beside it)")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--box", type=int, help="box side for grow")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="jigsaw", description="Jigsaw percolation simulator and constants.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("run", "sweep", "pc", "grow", "render"):
        _experiment_flags(sub.add_parser(name))
    th = sub.add_parser("theory", help="print a constant as JSON")
    th.add_argument("--const", required=True, choices=CONSTANTS)
    th.add_argument("--sigma", type=int, default=1)
    th.add_argument("--k", type=int, default=6)
    th.add_argument("--ell", type=int, default=4)
    th.add_argument("--p-site", dest="p_site", type=float, default=0.6795)
    th.add_argument("--c", type=float, default=1.5116)
    th.add_argument("--lam", type=float, default=0.0388)
    th.add_argument("--r", type=float, default=0.5)
    th.add_argument("--phi-mode", dest="phi_mode", choices=("exact", "montecarlo"), default="exact")
    th.add_argument("--phi-trials", dest="phi_trials", type=int, default=100_000)
    th.add_argument("--seed", type=_seed, default=0)
    th.add_argument("--out")
    sub.add_parser("selftest")
    return ap


# ------------------------------------------------------------------ config
def effective_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for key in ("topology", "sigma", "tau", "theta", "rule", "p", "p_grid", "trials", "seed",
                "parallelism", "out", "snapshot_every", "box"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    pc_over = {k: getattr(args, a) for k, a in (("tol", "pc_tol"), ("trials_per_level", "pc_trials"),
                                                ("p_lo", "pc_lo"), ("p_hi", "pc_hi"))
               if getattr(args, a, None) is not None}
    if args.pc or pc_over or (cfg.pc is None and args.command == "pc"):
        base = cfg.pc or PcBlock()
        for k, v in pc_over.items():
            setattr(base, k, v)
        cfg.pc = base
    return cfg


def _params(cfg: ExperimentConfig) -> DynamicsParams:
    theta = math.inf if cfg.theta == "inf" else int(cfg.theta)
    return DynamicsParams(cfg.sigma, cfg.tau, theta, cfg.rule)


def _parallelism(cfg: ExperimentConfig) -> int:
    return cfg.parallelism if cfg.parallelism else default_parallelism()


def _summary_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.name + ".json") if p.suffix == ".json" else p.with_suffix(".json")


def _emit(cfg: ExperimentConfig, rows, estimates, started: float, text: str | None = None) -> None:
    body = format_csv(rows) if text is None else text
    if cfg.out:
        Path(cfg.out).write_text(body)
        write_summary({"config": cfg.to_dict(), "version": artifact_version(),
                       "wall_clock_s": time.perf_counter() - started, "estimates": estimates},
                      _summary_path(cfg.out))
    else:
        sys.stdout.write(body)


def _estimate_dict(e) -> dict:
    return {k: getattr(e, k) for k in ("p", "trials", "successes", "p_hat", "ci_low", "ci_high",
                                         "tf_mean", "tf_median", "max_exams_per_vertex")}


# ------------------------------------------------------------------ commands
def cmd_run(cfg: ExperimentConfig, started: float) -> int:
    if cfg.pc is not None:
        return cmd_pc(cfg, started)
    if cfg.p_grid is not None:
        return cmd_sweep(cfg, started)
    if cfg.p is None:
        raise UsageError("run needs --p (or --p-grid / --pc)")
    topo, params = parse_topology(cfg.topology), _params(cfg)
    est = estimate_solve(McConfig(topo, params, cfg.p, cfg.trials, cfg.seed, _parallelism(cfg),
                                  track_exams=True))
    _emit(cfg, [est.row(topo, params, cfg.seed)], [_estimate_dict(est)], started)
    if cfg.snapshot_every:
        if not cfg.out:
            raise UsageError("--snapshot-every needs --out")
        frames = Path(cfg.out).with_suffix("")
        frames = frames.with_name(frames.name + "_frames")
        write_snapshots(topo, params, cfg.p, cfg.seed, cfg.snapshot_every, frames)
    return 0


def cmd_sweep(cfg: ExperimentConfig, started: float) -> int:
    if cfg.p_grid is None:
        raise UsageError("sweep needs --p-grid a:b:step")
    topo, params = parse_topology(cfg.topology), _params(cfg)
    ests = coupled_sweep(topo, params, parse_grid(cfg.p_grid), cfg.trials, cfg.seed, _parallelism(cfg))
    _emit(cfg, [e.row(topo, params, cfg.seed) for e in ests], [_estimate_dict(e) for e in ests], started)
    return 0


def cmd_pc(cfg: ExperimentConfig, started: float) -> int:
    pc = cfg.pc or PcBlock()
    topo, params = parse_topology(cfg.topology), _params(cfg)
    est = estimate_pc(topo, params, cfg.seed, pc.trials_per_level, pc.tol, pc.p_lo, pc.p_hi,
                      parallelism=_parallelism(cfg))
    row = {"topology": topo.spec, "sigma": params.sigma, "tau": params.tau, "theta": params.theta_text,
           "rule": params.rule, "p_lo": est.p_lo, "p_hi": est.p_hi, "p_c_hat": est.p_c_hat,
           "status": est.status, "seed": cfg.seed}
    text = json.dumps(row, sort_keys=True) + "\n"
    _emit(cfg, None, {**row, "evaluations": est.evaluations}, started, text=text)
    return 0 if est.status != "ambiguous" else 2


def cmd_grow(cfg: ExperimentConfig, started: float) -> int:
    from .engine.local import local_grow
    from .theory.constants import grow_lower_bound_theta2

    if cfg.p is None or cfg.box is None:
        raise UsageError("grow needs --p and --box")
    params = _params(cfg)
    hits = sum(local_grow(params, cfg.p, trial_seed(cfg.seed, i), cfg.box, stop_on_reach=True)[0]
               for i in range(cfg.trials))
    ph = hits / cfg.trials
    out = {"p": cfg.p, "box": cfg.box, "trials": cfg.trials, "successes": hits, "p_hat": ph,
           "std_error": math.sqrt(ph * (1 - ph) / cfg.trials), "seed": cfg.seed}
    if params.theta == 2 and params.tau == 1 and 0 < cfg.p < 1:
        out["lower_bound"] = grow_lower_bound_theta2(params.sigma, cfg.p, 1000)
    _emit(cfg, None, out, started, text=json.dumps(out, sort_keys=True) + "\n")
    return 0


def write_snapshots(topo, params, p, seed, every, directory) -> list[Path]:
    """Run trial 0 and write a PPM every ``every`` steps, plus the final partition."""
    if every < 1:
        raise UsageError("--snapshot-every must be >= 1")
    if topo.family != "torus" or topo.d != 2:
        raise UsageError("snapshots need a 2D torus")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    proc = JigsawProcess(topo, params, EdgeSampler(trial_seed(seed, 0), p), track=False)
    paths = []

    def save():
        path = directory / f"t{proc.t:05d}.ppm"
        render_snapshot(topo, proc.labels).save(path)
        paths.append(path)

    save()
    while proc.step():
        if proc.t % every == 0:
            save()
    if proc.t % every:
        save()
    return paths


def cmd_render(cfg: ExperimentConfig, started: float) -> int:
    if cfg.p is None or not cfg.out:
        raise UsageError("render needs --p and --out (a directory)")
    topo, params = parse_topology(cfg.topology), _params(cfg)
    paths = write_snapshots(topo, params, cfg.p, cfg.seed, cfg.snapshot_every or 1, cfg.out)
    for p in paths:
        print(p)
    return 0


def cmd_theory(args) -> int:
    from .theory import constants as C
    from .theory import crossing as X

    name = args.const
    mode = "exact" if args.phi_mode == "exact" else X.MonteCarlo(args.phi_trials, args.seed)
    if name == "lambda":
        r = C.lambda_sigma(args.sigma)
        out = {"params": {"sigma": args.sigma}, "value": r.value, "error_estimate": r.error,
               "method": "adaptive Simpson, cubic substitution at 0"}
    elif name == "nu":
        q = C.nu_sigma_quadrature(args.sigma)
        v = C.nu_sigma(args.sigma)
        out = {"params": {"sigma": args.sigma}, "value": v, "error_estimate": abs(v - q.value),
               "method": "closed form (Lanczos gamma, Euler-Maclaurin zeta); error vs quadrature"}
    elif name == "lb2d":
        v, a = C.lb2d_infimum(args.c, args.lam)
        out = {"params": {"c": args.c, "lam": args.lam}, "value": v, "argmin": a,
               "error_estimate": 1e-12, "method": "grid plus golden section on [1, 2]"}
    elif name == "ub2d":
        r = X.ub2d_bound(args.k, args.ell, args.p_site, mode)
        out = {"params": {"k": args.k, "ell": args.ell, "p_site": args.p_site}, "value": r.value,
               "error_estimate": r.error, "method": f"adaptive Simpson, phi {args.phi_mode}"}
    else:
        v = X.phi(X.PhiSpec(args.k, args.ell, mode), args.r)
        out = {"params": {"k": args.k, "ell": args.ell, "r": args.r}, "value": v,
               "error_estimate": 0.0 if mode == "exact" else 1 / math.sqrt(args.phi_trials),
               "method": f"phi {args.phi_mode}"}
    text = json.dumps({"name": name, **out}, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_selftest() -> int:
    """Quick end-to-end checks; prints one line per check."""
    from .topology import ring
    from .theory import constants as C

    checks = []
    params = DynamicsParams()
    a = estimate_solve(McConfig(ring(256), params, 0.3, 20, 7, 1))
    b = estimate_solve(McConfig(ring(256), params, 0.3, 20, 7, 1))
    checks.append(("determinism", a.successes == b.successes and
                   (a.t_final == b.t_final).all()))
    full = estimate_solve(McConfig(ring(64), params, 1.0, 3, 0, 1))
    checks.append(("p=1 solves", full.successes == 3))
    empty = estimate_solve(McConfig(ring(64), params, 0.0, 3, 0, 1))
    checks.append(("p=0 stays singletons", empty.successes == 0))
    checks.append(("lambda_1", abs(C.lambda_sigma(1).value - math.pi ** 2 / 6) < 1e-6))
    checks.append(("nu_1", abs(C.nu_sigma(1) - 3.216) < 1e-3))
    ok = True
    for name, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= bool(passed)
    return 0 if ok else 2


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command == "theory":
            return cmd_theory(args)
        if args.command == "selftest":
            return cmd_selftest()
        cfg = effective_config(args)
        handler = {"run": cmd_run, "sweep": cmd_sweep, "pc": cmd_pc, "grow": cmd_grow,
                   "render": cmd_render}[args.command]
        return handler(cfg, started)
    except (UsageError, TopologyError) as e:
        print(f"jigsaw: usage error: {e}", file=sys.stderr)
        return 1
    except (ConvergenceError, BracketError, OSError, RuntimeError, ValueError) as e:
        print(f"jigsaw: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
