"""Trial batching, solve-probability estimates, critical-probability search."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import kernel as K
from .engine.dynamics import DynamicsParams, UsageError
from .randomness import EdgeSampler, trial_seed
from .topology import Topology

CSV_HEADER = ("topology", "sigma", "tau", "theta", "rule", "p", "trials", "successes",
              "p_hat", "ci_low", "ci_high", "tf_median", "max_exams_per_vertex", "seed")

Z95 = 1.959963984540054


class BracketError(RuntimeError):
    """The requested interval does not bracket the 1/2 crossing."""


def default_parallelism() -> int:
    try:
        return max(1, int(os.environ.get("JIGSAW_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    topology: Topology
    params: DynamicsParams
    p: float
    trials: int
    master_seed: int = 0
    parallelism: int = field(default_factory=default_parallelism)
    track_exams: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise UsageError("p must lie in [0, 1]")


@dataclass
class McEstimate:
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    tf_mean: float
    tf_median: float
    max_exams_per_vertex: int
    p: float = float("nan")
    outcomes: np.ndarray | None = field(default=None, repr=False)
    t_final: np.ndarray | None = field(default=None, repr=False)

    def row(self, topology: Topology, params: DynamicsParams, seed: int) -> dict:
        return {
            "topology": topology.spec, "sigma": params.sigma, "tau": params.tau,
            "theta": params.theta_text, "rule": params.rule, "p": repr(float(self.p)),
            "trials": self.trials, "successes": self.successes, "p_hat": f"{self.p_hat:.6f}",
            "ci_low": f"{self.ci_low:.6f}", "ci_high": f"{self.ci_high:.6f}",
            "tf_median": "" if math.isnan(self.tf_median) else f"{self.tf_median:g}",
            "max_exams_per_vertex": self.max_exams_per_vertex, "seed": seed,
        }


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise UsageError("trials must be >= 1")
    ph = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (ph + z2 / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return min(lo, ph), max(hi, ph)


# ------------------------------------------------------------------ trials
def _kernel_run(graph, params: DynamicsParams, sampler: EdgeSampler, labels, track: bool):
    indptr, indices, gid = graph
    labels = gid if labels is None else labels
    lab, t, ncl, _, _, _, counts = K.run_kernel(
        labels, indptr, indices, gid, *params.kernel_args(), K.POLICY_SYNC, 0,
        *sampler.kernel_args(), track, 1024 if not track else 4 * gid.size)
    mx = int(counts.max()) if track and counts.size else 0
    return lab.astype(np.int64), int(t), int(ncl) == 1, mx


def _graph(topology: Topology):
    indptr, indices = topology.csr()
    return indptr, indices, np.arange(topology.N, dtype=np.int64)


def _map_trials(fn, n: int, parallelism: int) -> list:
    """Apply ``fn(i)`` for ``i < n``; results in index order for any thread count."""
    if parallelism <= 1 or n == 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, range(n)))


def _summarise(p: float, solved: np.ndarray, tf: np.ndarray, mx: int) -> McEstimate:
    trials = solved.size
    s = int(solved.sum())
    lo, hi = wilson_interval(s, trials)
    valid = tf[tf >= 0]
    return McEstimate(
        trials=trials, successes=s, p_hat=s / trials, ci_low=lo, ci_high=hi,
        tf_mean=float(valid.mean()) if valid.size else float("nan"),
        tf_median=float(np.median(valid)) if valid.size else float("nan"),
        max_exams_per_vertex=mx, p=p, outcomes=solved, t_final=tf,
    )


def estimate_solve(cfg: McConfig) -> McEstimate:
    """Independent synchronous runs; trial ``i`` uses ``trial_seed(master_seed, i)``."""
    graph = _graph(cfg.topology)

    def one(i):
        s = EdgeSampler(trial_seed(cfg.master_seed, i), cfg.p)
        _, t, ok, mx = _kernel_run(graph, cfg.params, s, None, cfg.track_exams)
        return ok, t, mx

    res = _map_trials(one, cfg.trials, cfg.parallelism)
    solved = np.array([r[0] for r in res], dtype=bool)
    tf = np.array([r[1] for r in res], dtype=np.int64)
    return _summarise(cfg.p, solved, tf, max(r[2] for r in res))


def coupled_sweep(topology: Topology, params: DynamicsParams, p_grid, trials: int,
                  master_seed: int = 0, parallelism: int | None = None,
                  warm_start: bool = False) -> list[McEstimate]:
    """Estimates along ``p_grid`` with one seed per trial shared by all grid points.

    With the monotone edge coupling, a trial's final partition at ``p`` refines
    the one at any larger ``p``.  ``warm_start=True`` uses this: each grid point
    starts from the previous point's final partition and, once a trial is
    solved, larger ``p`` are recorded as solved without running.  Both give the
    same solve indicators; warm-started runs do not report ``T_f``.
    """
    grid = [float(p) for p in p_grid]
    if not grid:
        raise UsageError("empty p grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("p grid must be strictly increasing")
    if any(not 0.0 <= p <= 1.0 for p in grid):
        raise UsageError("p must lie in [0, 1]")
    parallelism = default_parallelism() if parallelism is None else parallelism
    graph = _graph(topology)
    m = len(grid)

    def one(i):
        seed = trial_seed(master_seed, i)
        ok = np.zeros(m, dtype=bool)
        tf = np.full(m, -1, dtype=np.int64)
        labels = None
        for j, p in enumerate(grid):
            s = EdgeSampler(seed, p)
            if warm_start:
                labels, t, solved, _ = _kernel_run(graph, params, s, labels, False)
                if j == 0:
                    tf[j] = t
                if solved:
                    ok[j:] = True
                    break
            else:
                _, tf[j], ok[j], _ = _kernel_run(graph, params, s, None, False)
        return ok, tf

    res = _map_trials(one, trials, parallelism)
    ok = np.array([r[0] for r in res]).reshape(trials, m)
    tf = np.array([r[1] for r in res]).reshape(trials, m)
    return [_summarise(p, ok[:, j], tf[:, j], 0) for j, p in enumerate(grid)]


# ---------------------------------------------------------------- p_c search
@dataclass
class PcEstimate:
    p_lo: float
    p_hi: float
    p_c_hat: float
    trials_per_level: int
    status: str                                # "converged", "budget" or "ambiguous"
    evaluations: list[tuple[float, int, int]]  # (p, trials, successes)

    @property
    def width(self) -> float:
        return self.p_hi - self.p_lo


def estimate_pc(topology: Topology, params: DynamicsParams, master_seed: int = 0,
                trials_per_level: int = 200, tol: float = 0.01, p_lo: float = 0.0,
                p_hi: float = 1.0, max_levels: int = 60, parallelism: int | None = None) -> PcEstimate:
    """Stochastic bisection for the 1/2 crossing of P(Solve).

    A level moves the bracket only when the Wilson interval excludes 1/2;
    otherwise trials double, up to 64 times the base.  All levels reuse the
    same trial seeds, so estimates at different ``p`` are coupled.
    """
    if tol <= 0:
        raise UsageError("tol must be positive")
    if not 0.0 <= p_lo < p_hi <= 1.0:
        raise UsageError("need 0 <= p_lo < p_hi <= 1")
    parallelism = default_parallelism() if parallelism is None else parallelism
    evals: list[tuple[float, int, int]] = []

    def est(p, n):
        e = estimate_solve(McConfig(topology, params, p, n, master_seed, parallelism))
        evals.append((p, n, e.successes))
        return e

    if est(p_lo, trials_per_level).ci_low > 0.5:
        raise BracketError(f"P(Solve) at p_lo={p_lo} is already above 1/2")
    if est(p_hi, trials_per_level).ci_high < 0.5:
        raise BracketError(f"P(Solve) at p_hi={p_hi} is still below 1/2")
    lo, hi = p_lo, p_hi
    cap = 64 * trials_per_level
    n = trials_per_level
    for _ in range(max_levels):
        if hi - lo < tol:
            return PcEstimate(lo, hi, (lo + hi) / 2, n, "converged", evals)
        mid = (lo + hi) / 2
        n = trials_per_level
        while True:
            e = est(mid, n)
            if e.ci_high < 0.5:
                lo = mid
                break
            if e.ci_low > 0.5:
                hi = mid
                break
            if 2 * n > cap:
                return PcEstimate(lo, hi, mid, n, "ambiguous", evals)
            n *= 2
    return PcEstimate(lo, hi, (lo + hi) / 2, n, "budget", evals)


# ---------------------------------------------------------------- T_f
@dataclass
class TfSummary:
    quantiles: dict[float, float]
    mean: float
    median: float
    median_log_ratio: float          # median of log T_f / log n over trials with T_f >= 1
    predicted_ratio: float | None    # lambda_sigma / (p log n) when supercritical
    near_prediction: bool | None


def tf_statistics(cfg: McConfig, band: float = 0.15) -> TfSummary:
    """Quantiles of ``T_f``; compares median ``log T_f / log n`` with ``lambda_sigma / lambda``.

    ``n`` is the family size parameter (the ring length for rings).  The
    prediction applies to the supercritical ring, ``lambda = p log n > lambda_sigma``.
    """
    from .theory.constants import lambda_sigma

    est = estimate_solve(cfg)
    tf = est.t_final.astype(float)
    qs = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)
    quant = {q: float(np.quantile(tf, q)) for q in qs}
    n = cfg.topology.n
    pos = tf[tf >= 1]
    ratio = float(np.median(np.log(pos) / math.log(n))) if pos.size and n > 1 else float("nan")
    pred = near = None
    if cfg.topology.family == "ring" and cfg.p > 0:
        lam = cfg.p * math.log(n)
        ls = lambda_sigma(cfg.params.sigma).value
        if lam > ls:
            pred = ls / lam
            near = bool(abs(ratio - pred) <= band)
    return TfSummary(quant, float(tf.mean()), float(np.median(tf)), ratio, pred, near)
