"""Command-line entry point: ``randtt <subcommand> ...``.

Files ending in ``.json`` are read and written in the JSON mirror format;
anything else uses the binary TT format.  Set ``RANDTT_NUM_THREADS`` to cap
BLAS threads (needs ``threadpoolctl``).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from . import costs, experiments, io
from .deterministic import tt_round
from .gmres import GmresConfig, build_cookie_surrogate, operator_from_json, tt_gmres
from .randomized import (
    RoundingConfig,
    round_orth_rand,
    round_rand_orth,
    round_rand_orth_adaptive,
    round_sum_adaptive,
    round_sum_rand_orth,
    round_two_sided,
)
from .tt import add_all, ones, random_gaussian_tt

THREADS_ENV = "RANDTT_NUM_THREADS"


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load(path):
    return io.load_json(path) if str(path).endswith(".json") else io.load(path)


def _save(x, path):
    if str(path).endswith(".json"):
        io.save_json(x, path)
    else:
        io.save(x, path)


def _expand_ranks(ranks, order):
    if len(ranks) == 1:
        return ranks * (order - 1)
    if len(ranks) != order - 1:
        raise ValueError(f"need 1 or {order - 1} ranks for an order-{order} tensor, got {len(ranks)}")
    return ranks


def _summary(x, extra=None) -> str:
    doc = {"dims": list(x.dims), "ranks": list(x.ranks)}
    doc.update({k: v for k, v in x.meta.items()})
    if extra:
        doc.update(extra)
    return json.dumps(doc, default=list)


def cmd_round(a):
    y = _load(a.input)
    if a.alg == "deterministic":
        ranks = None if a.ranks is None else _expand_ranks(a.ranks, y.order)
        x = tt_round(y, a.eps, ranks)
    else:
        if a.ranks is None:
            raise ValueError(f"--ranks is required for --alg {a.alg}")
        ranks = _expand_ranks(a.ranks, y.order)
        if a.alg == "rand-orth-adaptive":
            x = round_rand_orth_adaptive(y, ranks, a.eps, seed=a.seed)
        else:
            left = None if a.left_ranks is None else _expand_ranks(a.left_ranks, y.order)
            cfg = RoundingConfig(target=ranks, seed=a.seed, left_ranks=left)
            fn = {"orth-rand": round_orth_rand, "rand-orth": round_rand_orth, "two-sided": round_two_sided}[a.alg]
            x = fn(y, cfg)
    _save(x, a.out)
    print(_summary(x))


def cmd_sum_round(a):
    terms = [_load(p) for p in a.inputs]
    if a.coeffs is not None:
        if len(a.coeffs) != len(terms):
            raise ValueError("--coeffs needs one value per input")
        terms = [t * c for t, c in zip(terms, a.coeffs)]
    N = terms[0].order
    if a.alg == "deterministic":
        x = tt_round(add_all(terms), a.eps, None if a.ranks is None else _expand_ranks(a.ranks, N))
    elif a.ranks is None:
        raise ValueError("--ranks is required for randomized sum rounding")
    elif a.eps > 0:
        x = round_sum_adaptive(terms, a.eps, _expand_ranks(a.ranks, N), seed=a.seed)
    else:
        cfg = RoundingConfig(target=_expand_ranks(a.ranks, N), seed=a.seed, workers=a.workers)
        x = round_sum_rand_orth(terms, cfg)
    _save(x, a.out)
    print(_summary(x, {"terms": len(terms)}))


def cmd_gmres(a):
    if a.operator:
        with open(a.operator) as fh:
            op = operator_from_json(fh.read())
        f = _load(a.rhs) if a.rhs else ones(op.dims)
    else:
        g, p, s = a.surrogate
        op, f = build_cookie_surrogate(g, p, s)
        if a.rhs:
            f = _load(a.rhs)
    cfg = GmresConfig(
        tol=a.tol, max_iter=a.max_iter, rounding=a.rounding, round_tol=a.round_tol, seed=a.seed, max_rank=a.max_rank
    )
    x, trace = tt_gmres(op, f, cfg)
    if a.out:
        _save(x, a.out)
    doc = trace.to_dict()
    doc["solution_ranks"] = list(x.ranks)
    text = json.dumps(doc)
    if a.trace:
        with open(a.trace, "w") as fh:
            fh.write(text)
    print(json.dumps({k: doc[k] for k in ("iterations", "converged", "breakdown", "solution_ranks")}
                     | {"final_residual": doc["residuals"][-1] if doc["residuals"] else None}))
    return 0 if trace.converged else 3


_BENCH = {
    "perturbed": (experiments.experiment_perturbed, experiments.PerturbedConfig),
    "timing": (experiments.experiment_timing, experiments.TimingConfig),
    "sum": (experiments.experiment_sum, experiments.SumConfig),
    "gmres": (experiments.experiment_gmres, experiments.GmresExperimentConfig),
    "hilbert": (experiments.experiment_hilbert, experiments.HilbertConfig),
}


def cmd_bench(a):
    run, cfg_cls = _BENCH[a.experiment]
    if a.full_scale:
        if not hasattr(cfg_cls, "full_scale"):
            raise ValueError(f"no full-scale configuration for {a.experiment}")
        cfg = cfg_cls.full_scale()
    else:
        cfg = cfg_cls()
    if a.seeds is not None:
        if hasattr(cfg, "seeds"):
            cfg.seeds = tuple(a.seeds)
        else:
            cfg.seed = a.seeds[0]
    if a.jobs > 1:
        if not hasattr(cfg, "jobs"):
            raise ValueError(f"--jobs is not supported by {a.experiment}")
        cfg.jobs = a.jobs
    res = run(cfg)
    csv_text = res.to_csv()
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if a.summary:
        with open(a.summary, "w") as fh:
            fh.write(res.to_json())


def cmd_cost_model(a):
    if a.curve is not None:
        sys.stdout.write(costs.speedup_csv(costs.speedup_curve(a.N, a.I, a.R, a.curve)))
        return
    if (a.beta is None) == (a.ell is None):
        raise ValueError("give exactly one of --beta, --ell or --curve")
    ell = a.beta * a.R if a.ell is None else a.ell
    beta = ell / a.R
    print("algorithm,coefficient,flops,speedup")
    for alg in costs.Algorithm:
        m = costs.CostModel(alg, a.N, a.I, a.R, ell, a.s)
        coef = costs.coefficient(alg, beta, a.s)
        sp = costs.flops(costs.CostModel(costs.Algorithm.TT_ROUND, a.N, a.I, a.R, ell)) / costs.flops(m)
        print(f"{alg.value},{coef!r},{costs.flops(m)!r},{sp!r}")


def cmd_gen(a):
    N = len(a.dims)
    if a.kind == "hilbert":
        if a.ranks is None:
            raise ValueError("--ranks is required for hilbert")
        x = experiments.hilbert_tt(a.dims, _expand_ranks(a.ranks, N))
    elif a.kind == "random":
        if a.ranks is None:
            raise ValueError("--ranks is required for random")
        x = random_gaussian_tt(a.dims, _expand_ranks(a.ranks, N), [a.seed])
    else:
        if a.ranks is None or len(set(a.dims)) != 1 or len(set(a.ranks)) != 1:
            raise ValueError("perturbed needs equal --dims and one uniform --ranks value")
        x = experiments.perturbed_tensor(N, a.dims[0], a.ranks[0], a.eps, a.seed)
    _save(x, a.out)
    print(_summary(x))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randtt", description="Randomized TT-rounding toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("round", help="round one TT tensor")
    r.add_argument("--alg", required=True, choices=["deterministic", "orth-rand", "rand-orth", "two-sided", "rand-orth-adaptive"])
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--ranks", type=_int_list, help="target internal ranks (one value broadcasts)")
    r.add_argument("--left-ranks", type=_int_list, help="two-sided right-sketch ranks (default ceil(1.5 l))")
    r.add_argument("--eps", type=float, default=0.0, help="relative tolerance")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_round)

    s = sub.add_parser("sum-round", help="round a sum of TT tensors")
    s.add_argument("--in", dest="inputs", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--alg", choices=["deterministic", "rand-orth"], default="rand-orth")
    s.add_argument("--coeffs", type=_float_list)
    s.add_argument("--ranks", type=_int_list)
    s.add_argument("--eps", type=float, default=0.0, help="with rand-orth: adaptive truncation tolerance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None, help="threads for per-term sketches")
    s.set_defaults(func=cmd_sum_round)

    g = sub.add_parser("gmres", help="solve a Kronecker-sum system with TT-GMRES")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--operator", help="operator JSON file")
    src.add_argument("--surrogate", type=_int_list, metavar="GRID,PARAMS,SAMPLES")
    g.add_argument("--rhs", help="right-hand side TT file (default: all ones)")
    g.add_argument("--rounding", choices=["deterministic", "randomized"], default="deterministic")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--round-tol", type=float, default=None)
    g.add_argument("--max-iter", type=int, default=50)
    g.add_argument("--max-rank", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="solution TT file")
    g.add_argument("--trace", help="write the full trace as JSON")
    g.set_defaults(func=cmd_gmres)

    b = sub.add_parser("bench", help="run an experiment and emit CSV")
    b.add_argument("experiment", choices=sorted(_BENCH))
    b.add_argument("--out", help="CSV path (default stdout)")
    b.add_argument("--summary", help="JSON summary path")
    b.add_argument("--seeds", type=_int_list)
    b.add_argument("--jobs", type=int, default=1, help="parallel seeds (perturbed only)")
    b.add_argument("--paper-scale", dest="full_scale", action="store_true", help="full-size parameters (slow)")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("cost-model", help="print leading-order flop counts")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--I", type=int, required=True)
    c.add_argument("--R", type=float, required=True)
    c.add_argument("--beta", type=float)
    c.add_argument("--ell", type=float)
    c.add_argument("--s", type=int, default=1)
    c.add_argument("--curve", type=_float_list, help="emit the speedup CSV over these beta values")
    c.set_defaults(func=cmd_cost_model)

    n = sub.add_parser("gen", help="generate a test tensor")
    n.add_argument("kind", choices=["hilbert", "random", "perturbed"])
    n.add_argument("--dims", type=_int_list, required=True)
    n.add_argument("--ranks", type=_int_list)
    n.add_argument("--eps", type=float, default=1e-6)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_gen)
    return p


def _thread_limit():
    val = os.environ.get(THREADS_ENV)
    if not val:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        print(f"warning: {THREADS_ENV} ignored; threadpoolctl is not installed", file=sys.stderr)
        return contextlib.nullcontext()
    return threadpool_limits(int(val))


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        with _thread_limit():
            rc = a.func(a)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        parser.exit(1, f"{parser.prog} {a.command}: error: {exc}\n")
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
