"""Desk-scale experiment drivers and test-tensor generators.

Each driver returns an :class:`ExperimentResult` whose record columns are
fixed per experiment id (see ``COLUMNS``).  Errors are always measured in TT
format with ``relative_error(..., method="orth")``.  Timings use the
monotonic clock and report the median of ``repeats`` runs with min and max.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .deterministic import tt_round
from .gmres import GmresConfig, build_cookie_surrogate, tt_gmres
from .randomized import (
    RoundingConfig,
    round_orth_rand,
    round_rand_orth,
    round_sum_rand_orth,
    round_two_sided,
)
from .tt import TT, add_all, random_gaussian_tt, relative_error

__all__ = [
    "COLUMNS",
    "ExperimentResult",
    "PerturbedConfig",
    "TimingConfig",
    "SumConfig",
    "GmresExperimentConfig",
    "HilbertConfig",
    "hilbert_tt",
    "perturbed_tensor",
    "time_call",
    "loglog_slope",
    "experiment_perturbed",
    "experiment_timing",
    "experiment_sum",
    "experiment_gmres",
    "experiment_hilbert",
]

COLUMNS = {
    "perturbed": ("algorithm", "eps", "ell", "seed", "error", "time_s"),
    "timing": ("algorithm", "N", "I", "R", "ell", "seed", "time_median_s", "time_min_s", "time_max_s"),
    "sum": ("method", "s", "seed", "error", "time_median_s", "time_min_s", "time_max_s"),
    "gmres": (
        "samples",
        "rounding",
        "seed",
        "iterations",
        "final_residual",
        "converged",
        "max_basis_rank",
        "time_op_s",
        "time_gs_s",
        "time_total_s",
    ),
    "hilbert": ("algorithm", "ell", "seed", "error"),
}


@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple:
        return COLUMNS[self.experiment]

    def add(self, **rec) -> None:
        if set(rec) != set(self.columns):
            raise ValueError(f"record keys {sorted(rec)} do not match columns {self.columns}")
        if "seed" not in rec:
            raise ValueError("every record must carry its seed")
        self.records.append(rec)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(self.columns), lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"experiment": self.experiment, "config": self.config, "summary": self.summary, "records": self.records},
            default=_jsonable,
        )


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def time_call(fn, repeats: int = 3):
    """Run ``fn`` ``repeats`` times; return ``(last result, median, min, max)`` wall times."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return out, float(np.median(times)), min(times), max(times)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def hilbert_tt(dims, ranks) -> TT:
    """Hilbert-type TT tensor: core ``n`` holds ``1 / (i1 + i2 + i3 - 1)`` with 1-based indices.

    ``ranks`` are the ``N - 1`` internal ranks.
    """
    dims = [int(d) for d in dims]
    r = [1] + [int(x) for x in ranks] + [1]
    if len(r) != len(dims) + 1:
        raise ValueError(f"need {len(dims) - 1} internal ranks, got {len(r) - 2}")
    cores = []
    for n, d in enumerate(dims):
        i1 = np.arange(1, r[n] + 1)[:, None, None]
        i2 = np.arange(1, d + 1)[None, :, None]
        i3 = np.arange(1, r[n + 1] + 1)[None, None, :]
        cores.append(1.0 / (i1 + i2 + i3 - 1))
    return TT(cores)


def perturbed_tensor(N: int, I: int, rank: int, eps: float, seed: int, rank2: int | None = None) -> TT:
    """``X1 + eps * X2`` for independent normalized Gaussian TT tensors of rank ``rank`` (and ``rank2``)."""
    dims = [I] * N
    x1 = random_gaussian_tt(dims, [rank] * (N - 1), [seed], stream=10)
    x2 = random_gaussian_tt(dims, [rank2 or rank] * (N - 1), [seed], stream=11)
    return add_all([x1, x2], [1.0, eps])


def _run_algorithm(name: str, y: TT, ell: int, seed: int) -> TT:
    N = y.order
    if name == "deterministic":
        return tt_round(y, 0.0, ranks=[ell] * (N - 1))
    cfg = RoundingConfig.uniform(N, ell, seed=seed)
    if name == "orth-rand":
        return round_orth_rand(y, cfg)
    if name == "rand-orth":
        return round_rand_orth(y, cfg)
    if name == "two-sided":
        return round_two_sided(y, cfg)
    raise ValueError(f"unknown algorithm {name!r}")


ALGORITHMS = ("deterministic", "orth-rand", "rand-orth", "two-sided")


@dataclass
class PerturbedConfig:
    N: int = 6
    I: int = 20
    rank: int = 8
    eps: tuple = (1e-2, 1e-6, 1e-10)
    ells: tuple = (6, 8, 10, 12, 14, 16)
    seeds: tuple = (0, 1, 2, 3, 4)
    algorithms: tuple = ALGORITHMS
    jobs: int = 1

    @classmethod
    def full_scale(cls) -> "PerturbedConfig":
        return cls(N=10, I=100, rank=50, ells=tuple(range(35, 81, 5)))


def _perturbed_seed(cfg: PerturbedConfig, eps: float, seed: int) -> list:
    y = perturbed_tensor(cfg.N, cfg.I, cfg.rank, eps, seed)
    recs = []
    for ell in cfg.ells:
        for alg in cfg.algorithms:
            t0 = time.perf_counter()
            x = _run_algorithm(alg, y, ell, seed)
            dt = time.perf_counter() - t0
            recs.append(
                dict(algorithm=alg, eps=eps, ell=ell, seed=seed, error=relative_error(x, y, "orth"), time_s=dt)
            )
    return recs


def experiment_perturbed(cfg: PerturbedConfig | None = None) -> ExperimentResult:
    """Round ``X1 + eps X2`` (ranks ``rank + rank``) to each target rank with every algorithm.

    ``summary["median_error"][alg][eps][ell]`` is the median over seeds.
    With ``jobs > 1`` seeds run concurrently; records keep the sequential order.
    """
    cfg = cfg or PerturbedConfig()
    res = ExperimentResult("perturbed", asdict(cfg))
    tasks = [(e, s) for e in cfg.eps for s in cfg.seeds]
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(lambda t: _perturbed_seed(cfg, *t), tasks))
    else:
        chunks = [_perturbed_seed(cfg, *t) for t in tasks]
    for chunk in chunks:
        for r in chunk:
            res.add(**r)
    med = {}
    for alg in cfg.algorithms:
        med[alg] = {}
        for e in cfg.eps:
            med[alg][repr(e)] = {
                ell: float(
                    np.median(
                        [r["error"] for r in res.records if r["algorithm"] == alg and r["eps"] == e and r["ell"] == ell]
                    )
                )
                for ell in cfg.ells
            }
    res.summary["median_error"] = med
    return res


@dataclass
class TimingConfig:
    N: int = 8
    I: int = 60
    rank: int = 30
    ell: int = 30
    seed: int = 0
    repeats: int = 5
    algorithms: tuple = ALGORITHMS

    @classmethod
    def full_scale(cls) -> "TimingConfig":
        return cls(N=10, I=100, rank=50, ell=50)


def experiment_timing(cfg: TimingConfig | None = None) -> ExperimentResult:
    """Wall time of each algorithm on one perturbed tensor of rank ``2 * rank``."""
    cfg = cfg or TimingConfig()
    res = ExperimentResult("timing", asdict(cfg))
    y = perturbed_tensor(cfg.N, cfg.I, cfg.rank, 1e-6, cfg.seed)
    for alg in cfg.algorithms:
        _run_algorithm(alg, y, cfg.ell, cfg.seed)  # warm-up
        _, med, lo, hi = time_call(lambda: _run_algorithm(alg, y, cfg.ell, cfg.seed), cfg.repeats)
        res.add(
            algorithm=alg, N=cfg.N, I=cfg.I, R=2 * cfg.rank, ell=cfg.ell, seed=cfg.seed,
            time_median_s=med, time_min_s=lo, time_max_s=hi,
        )
    det = next(r["time_median_s"] for r in res.records if r["algorithm"] == "deterministic")
    res.summary["speedup"] = {r["algorithm"]: det / r["time_median_s"] for r in res.records}
    return res


SUM_METHODS = ("tt-round", "rand-orth", "sum-rand-orth")


@dataclass
class SumConfig:
    s_values: tuple = (2, 5, 10, 20)
    rank: int = 20
    N: int = 5
    I: int = 30
    ell: int = 20
    seed: int = 0
    repeats: int = 3
    measure_error: bool = True

    @classmethod
    def full_scale(cls) -> "SumConfig":
        return cls(N=10, I=100, rank=50, ell=50)


def experiment_sum(cfg: SumConfig | None = None) -> ExperimentResult:
    """Round a sum of ``s`` rank-``rank`` tensors to rank ``ell`` three ways.

    ``tt-round``: fixed-rank deterministic rounding of the assembled sum.
    ``rand-orth``: Randomize-then-Orthogonalize on the assembled sum.
    ``sum-rand-orth``: the structured variant working term by term.
    The assembly of the sum is not timed.  Errors are against the exact sum.  The summary holds
    log-log slopes of time against ``s``, the speedup of ``sum-rand-orth``
    over ``tt-round`` at each ``s``, and the largest relative difference
    between the two randomized outputs (same seed).
    """
    cfg = cfg or SumConfig()
    res = ExperimentResult("sum", asdict(cfg))
    dims = [cfg.I] * cfg.N
    gap = 0.0
    for s in cfg.s_values:
        terms = [random_gaussian_tt(dims, [cfg.rank] * (cfg.N - 1), [cfg.seed, s], stream=20 + j) for j in range(s)]
        assembled = add_all(terms)
        rcfg = RoundingConfig.uniform(cfg.N, cfg.ell, seed=cfg.seed)
        runs = {
            "tt-round": lambda: tt_round(assembled, 0.0, ranks=[cfg.ell] * (cfg.N - 1)),
            "rand-orth": lambda: round_rand_orth(assembled, rcfg),
            "sum-rand-orth": lambda: round_sum_rand_orth(terms, rcfg),
        }
        outs = {}
        for m in SUM_METHODS:
            runs[m]()  # warm-up
            outs[m], med, lo, hi = time_call(runs[m], cfg.repeats)
            err = relative_error(outs[m], assembled, "orth") if cfg.measure_error else float("nan")
            res.add(method=m, s=s, seed=cfg.seed, error=err, time_median_s=med, time_min_s=lo, time_max_s=hi)
        gap = max(gap, relative_error(outs["sum-rand-orth"], outs["rand-orth"], "orth"))

    def times(m):
        return [r["time_median_s"] for r in res.records if r["method"] == m]

    if len(cfg.s_values) >= 2:
        res.summary["slope"] = {m: loglog_slope(cfg.s_values, times(m)) for m in SUM_METHODS}
    res.summary["speedup"] = {
        s: a / c for s, a, c in zip(cfg.s_values, times("tt-round"), times("sum-rand-orth"))
    }
    res.summary["max_randomized_gap"] = gap
    return res


@dataclass
class GmresExperimentConfig:
    grid_points: int = 64
    num_params: int = 3
    samples: tuple = (4, 8, 16)
    tol: float = 1e-8
    max_iter: int = 50
    seed: int = 0
    repeats: int = 1

    @classmethod
    def full_scale(cls) -> "GmresExperimentConfig":
        return cls(grid_points=512, samples=(10, 20, 40, 80))


def experiment_gmres(cfg: GmresExperimentConfig | None = None) -> ExperimentResult:
    """Solve the surrogate problem with both rounding paths for each sample count.

    ``summary["speedup"][I]`` is deterministic over randomized total time;
    ``summary["rank_history"][rounding][I]`` lists the basis ranks per iteration.
    """
    cfg = cfg or GmresExperimentConfig()
    res = ExperimentResult("gmres", asdict(cfg))
    history = {"deterministic": {}, "randomized": {}}
    totals = {}
    for samples in cfg.samples:
        op, f = build_cookie_surrogate(cfg.grid_points, cfg.num_params, samples)
        for rounding in ("deterministic", "randomized"):
            gcfg = GmresConfig(tol=cfg.tol, max_iter=cfg.max_iter, rounding=rounding, seed=cfg.seed)
            (x, tr), med, _, _ = time_call(lambda: tt_gmres(op, f, gcfg), cfg.repeats)
            totals[(samples, rounding)] = med
            history[rounding][samples] = [list(r) for r in tr.basis_ranks]
            res.add(
                samples=samples,
                rounding=rounding,
                seed=cfg.seed,
                iterations=tr.iterations,
                final_residual=float(tr.residuals[-1]) if tr.residuals else float("nan"),
                converged=tr.converged,
                max_basis_rank=max((max(r) for r in tr.basis_ranks), default=0),
                time_op_s=float(sum(tr.time_op)),
                time_gs_s=float(sum(tr.time_gs)),
                time_total_s=med,
            )
    res.summary["speedup"] = {
        s: totals[(s, "deterministic")] / totals[(s, "randomized")] for s in cfg.samples
    }
    its = {r["rounding"]: [] for r in res.records}
    for r in res.records:
        its[r["rounding"]].append(r["iterations"])
    res.summary["iteration_spread"] = {k: max(v) - min(v) for k, v in its.items()}
    res.summary["rank_history"] = history
    return res


@dataclass
class HilbertConfig:
    dims: tuple = tuple(range(6, 25, 2))
    ranks: tuple = tuple(range(4, 13))
    ells: tuple = tuple(range(1, 13))
    seeds: tuple = (0, 1, 2, 3, 4)
    algorithms: tuple = ("deterministic", "orth-rand", "rand-orth")


def experiment_hilbert(cfg: HilbertConfig | None = None) -> ExperimentResult:
    """Round the Hilbert-type tensor to uniform target ranks (capped per bond).

    The deterministic algorithm is seed-independent and is run once, under
    seed 0.  ``summary["median_error"][alg][ell]`` is the median over seeds.
    """
    cfg = cfg or HilbertConfig()
    res = ExperimentResult("hilbert", asdict(cfg))
    y = hilbert_tt(cfg.dims, cfg.ranks)
    med = {a: {} for a in cfg.algorithms}
    for ell in cfg.ells:
        for alg in cfg.algorithms:
            seeds = cfg.seeds[:1] if alg == "deterministic" else cfg.seeds
            errs = []
            for seed in seeds:
                e = relative_error(_run_algorithm(alg, y, ell, seed), y, "orth")
                errs.append(e)
                res.add(algorithm=alg, ell=ell, seed=seed, error=e)
            med[alg][ell] = float(np.median(errs))
    res.summary["median_error"] = med
    return res
