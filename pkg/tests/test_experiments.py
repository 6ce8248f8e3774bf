import csv
import io
import json

import numpy as np
import pytest

from randtt.experiments import (
    COLUMNS,
    ExperimentResult,
    GmresExperimentConfig,
    HilbertConfig,
    PerturbedConfig,
    SumConfig,
    TimingConfig,
    experiment_gmres,
    experiment_hilbert,
    experiment_perturbed,
    experiment_sum,
    experiment_timing,
    hilbert_tt,
    loglog_slope,
    perturbed_tensor,
    time_call,
)
from randtt.tt import norm, validate


def test_hilbert_first_core_pattern():
    # i1 = 1 on the first core, so entries are 1 / (i2 + i3): a Hankel block
    x = hilbert_tt([2, 3], [2])
    assert np.allclose(x.cores[0][0], [[1 / 2, 1 / 3], [1 / 3, 1 / 4]])


def test_hilbert_formula_one_based():
    x = hilbert_tt([3, 4, 2], [2, 3])
    c = x.cores[1]
    for i1 in range(2):
        for i2 in range(4):
            for i3 in range(3):
                assert c[i1, i2, i3] == 1.0 / ((i1 + 1) + (i2 + 1) + (i3 + 1) - 1)


def test_hilbert_reference_configuration():
    x = hilbert_tt(range(6, 25, 2), range(4, 13))
    assert validate(x) is None
    assert x.order == 10
    assert x.ranks == (1, 4, 5, 6, 7, 8, 9, 10, 11, 12, 1)
    assert x.dims == tuple(range(6, 25, 2))


def test_hilbert_symmetry_square_core():
    c = hilbert_tt([3, 5, 3], [4, 4]).cores[1]
    assert np.array_equal(c, c.transpose(2, 1, 0))


def test_hilbert_rank_count():
    with pytest.raises(ValueError):
        hilbert_tt([3, 3, 3], [2])


def test_perturbed_tensor():
    x = perturbed_tensor(4, 5, 3, 1e-3, seed=2)
    assert x.internal_ranks == (6, 6, 6)
    y = perturbed_tensor(4, 5, 3, 1e-3, seed=2)
    assert all(np.array_equal(a, b) for a, b in zip(x.cores, y.cores))
    assert 0.1 < norm(x) < 10


def test_time_call_and_slope():
    calls = []
    out, med, lo, hi = time_call(lambda: calls.append(1) or len(calls), repeats=3)
    assert out == 3 and lo <= med <= hi
    with pytest.raises(ValueError):
        time_call(lambda: None, repeats=0)
    assert abs(loglog_slope([1, 2, 4, 8], [3, 24, 192, 1536]) - 3.0) < 1e-12


def test_result_schema_enforced():
    r = ExperimentResult("hilbert", {})
    with pytest.raises(ValueError):
        r.add(algorithm="x", ell=1, error=0.0)
    r.add(algorithm="x", ell=1, seed=0, error=0.5)
    rows = list(csv.DictReader(io.StringIO(r.to_csv())))
    assert list(rows[0]) == list(COLUMNS["hilbert"])
    assert json.loads(r.to_json())["records"][0]["seed"] == 0


SMALL = PerturbedConfig(N=4, I=8, rank=3, eps=(1e-3,), ells=(2, 3, 4, 6), seeds=(0, 1))


def test_perturbed_reproducible_modulo_timing():
    a = experiment_perturbed(SMALL)
    b = experiment_perturbed(SMALL)
    strip = lambda res: [{k: v for k, v in r.items() if k != "time_s"} for r in res.records]
    assert strip(a) == strip(b)
    assert tuple(next(csv.reader(io.StringIO(a.to_csv())))) == COLUMNS["perturbed"]
    assert len(a.records) == 4 * 4 * 2


def test_perturbed_parallel_seeds_match():
    cfg = PerturbedConfig(**{**SMALL.__dict__, "jobs": 2})
    a = experiment_perturbed(SMALL)
    b = experiment_perturbed(cfg)
    assert [r["error"] for r in a.records] == [r["error"] for r in b.records]


def test_perturbed_median_monotone_in_ell():
    res = experiment_perturbed(PerturbedConfig(eps=(1e-2,), ells=(8, 10, 12, 14, 16)))
    med = res.summary["median_error"]
    for alg in ("orth-rand", "rand-orth", "two-sided"):
        vals = [med[alg]["0.01"][l] for l in (8, 10, 12, 14, 16)]
        assert all(a >= b for a, b in zip(vals, vals[1:])), alg


def test_timing_experiment_schema():
    res = experiment_timing(TimingConfig(N=4, I=10, rank=3, ell=3, repeats=1))
    assert [r["algorithm"] for r in res.records] == ["deterministic", "orth-rand", "rand-orth", "two-sided"]
    assert res.summary["speedup"]["deterministic"] == 1.0


def test_sum_experiment_small():
    res = experiment_sum(SumConfig(s_values=(2, 3), rank=3, N=4, I=6, ell=3, repeats=1))
    assert tuple(next(csv.reader(io.StringIO(res.to_csv())))) == COLUMNS["sum"]
    assert res.summary["max_randomized_gap"] <= 1e-10
    assert set(res.summary["slope"]) == {"tt-round", "rand-orth", "sum-rand-orth"}
    by = {(r["method"], r["s"]): r["error"] for r in res.records}
    assert by[("rand-orth", 2)] == pytest.approx(by[("sum-rand-orth", 2)], rel=1e-8)


def test_hilbert_experiment_small():
    res = experiment_hilbert(HilbertConfig(dims=(4, 5, 6, 5), ranks=(3, 4, 3), ells=(1, 2, 4), seeds=(0, 1)))
    med = res.summary["median_error"]
    assert med["deterministic"][4] < 1e-13
    for alg in ("orth-rand", "rand-orth"):
        assert med[alg][1] / med["deterministic"][1] < 10
    assert sum(r["algorithm"] == "deterministic" for r in res.records) == 3


def test_full_scale_configs():
    p = PerturbedConfig.full_scale()
    assert (p.N, p.I, p.rank) == (10, 100, 50)
    assert p.ells == tuple(range(35, 81, 5))
    assert SumConfig.full_scale().N == 10
    assert TimingConfig.full_scale().ell == 50


@pytest.fixture(scope="module")
def gmres_result():
    return experiment_gmres(GmresExperimentConfig())


def test_gmres_experiment_converges(gmres_result):
    assert all(r["converged"] and r["final_residual"] <= 1e-8 for r in gmres_result.records)
    assert tuple(next(csv.reader(io.StringIO(gmres_result.to_csv())))) == COLUMNS["gmres"]


def test_gmres_iterations_depend_weakly_on_samples(gmres_result):
    for rounding, spread in gmres_result.summary["iteration_spread"].items():
        assert spread <= 3, (rounding, spread)


def test_gmres_speedup_nondecreasing(gmres_result):
    sp = [gmres_result.summary["speedup"][s] for s in (4, 8, 16)]
    assert all(a <= b for a, b in zip(sp, sp[1:])), sp
