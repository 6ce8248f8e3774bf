import numpy as np
import pytest

from conftest import low_rank_redundant, rand_tt
from randtt.deterministic import partial_contractions_rl
from randtt.linalg import SketchRankError
from randtt.randomized import (
    RoundingConfig,
    cap_ranks,
    default_left_ranks,
    round_orth_rand,
    round_rand_orth,
    round_rand_orth_adaptive,
    round_sum_adaptive,
    round_sum_rand_orth,
    round_two_sided,
)
from randtt.tt import add_all, h_unfold, random_gaussian_tt, relative_error, zeros

ALGS = [round_orth_rand, round_rand_orth, round_two_sided]


def test_config_validation():
    assert RoundingConfig.uniform(4, 3).target == (3, 3, 3)
    with pytest.raises(ValueError):
        RoundingConfig(target=(0, 2))
    with pytest.raises(ValueError):
        RoundingConfig(target=(3, 3), left_ranks=(2, 4))
    with pytest.raises(ValueError):
        RoundingConfig(target=(3, 3), left_ranks=(4,))
    assert default_left_ranks([5, 6, 1]) == (8, 9, 2)


def test_cap_ranks():
    assert cap_ranks([5, 5, 5], [3, 10, 10, 3], [9, 9, 9]) == ((3, 5, 3), True)
    assert cap_ranks([4, 4], [5, 5, 5], [8, 8]) == ((4, 4), False)
    assert cap_ranks([9, 9], [5, 5, 5], [2, 7]) == ((2, 5), True)
    with pytest.raises(ValueError):
        cap_ranks([1], [2, 2, 2], [1, 1])


@pytest.mark.parametrize("alg", ALGS)
def test_exact_recovery(rng, alg):
    x, y = low_rank_redundant(rng, [6, 7, 6, 7], 4, 8)
    z = alg(y, RoundingConfig.uniform(4, 4, seed=3))
    assert z.internal_ranks == (4, 4, 4)
    assert relative_error(z, x, "orth") <= 1e-8


@pytest.mark.parametrize("alg", ALGS)
def test_rank_contract_and_capping(rng, alg):
    y = rand_tt(rng, [3, 8, 8, 3], [3, 6, 3])
    z = alg(y, RoundingConfig.uniform(4, 5, seed=1))
    assert z.internal_ranks == (3, 5, 3)
    assert z.meta["rank_capped"] is True
    assert z.meta["target_ranks"] == (5, 5, 5)


@pytest.mark.parametrize("alg", ALGS)
def test_seed_determinism(rng, alg):
    y = rand_tt(rng, [5, 6, 5, 6], [6, 6, 6])
    a = alg(y, RoundingConfig.uniform(4, 3, seed=11))
    b = alg(y, RoundingConfig.uniform(4, 3, seed=11))
    c = alg(y, RoundingConfig.uniform(4, 3, seed=12))
    assert all(np.array_equal(p, q) for p, q in zip(a.cores, b.cores))
    assert not all(np.array_equal(p, q) for p, q in zip(a.cores, c.cores))


def test_rand_orth_left_orthogonal(rng):
    y = rand_tt(rng, [5, 6, 5, 6], [6, 7, 6])
    z = round_rand_orth(y, RoundingConfig.uniform(4, 4, seed=0))
    for c in z.cores[:-1]:
        v = c.reshape(-1, c.shape[2])
        assert np.linalg.norm(v.T @ v - np.eye(v.shape[1])) < 1e-12


def test_orth_rand_left_orthogonal(rng):
    y = rand_tt(rng, [5, 6, 5, 6], [6, 7, 6])
    z = round_orth_rand(y, RoundingConfig.uniform(4, 4, seed=0))
    for c in z.cores[:-1]:
        v = c.reshape(-1, c.shape[2])
        assert np.linalg.norm(v.T @ v - np.eye(v.shape[1])) < 1e-12


def test_two_sided_zero_sketch_names_bond():
    with pytest.raises(SketchRankError, match="bond 1"):
        round_two_sided(zeros([3, 3, 3]), RoundingConfig.uniform(3, 1))


def test_two_sided_left_ranks_recorded(rng):
    y = rand_tt(rng, [5, 6, 5], [5, 5])
    z = round_two_sided(y, RoundingConfig(target=(2, 2), left_ranks=(4, 3)))
    assert z.meta["left_ranks"] == (4, 3)
    assert round_two_sided(y, RoundingConfig.uniform(3, 2)).meta["left_ranks"] == (3, 3)


def test_error_decreases_with_target_rank(rng):
    y = rand_tt(rng, [8, 8, 8, 8], [8, 8, 8])
    errs = [
        np.median([relative_error(round_rand_orth(y, RoundingConfig.uniform(4, l, seed=s)), y, "orth") for s in range(5)])
        for l in (2, 4, 6, 8)
    ]
    assert all(a >= b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-12


def test_adaptive_rand_orth(rng):
    x, y = low_rank_redundant(rng, [6, 6, 6, 6], 3, 10)
    z = round_rand_orth_adaptive(y, [6, 6, 6], 1e-10, seed=2)
    assert z.internal_ranks == (3, 3, 3)
    assert relative_error(z, x, "orth") < 1e-9


# ---- sums --------------------------------------------------------------------


def _terms(s, dims=(5, 6, 7, 5), rank=3, seed=0):
    return [random_gaussian_tt(dims, [rank] * (len(dims) - 1), [seed, j], stream=5) for j in range(s)]


def test_sum_single_term_equals_rand_orth():
    (t,) = _terms(1)
    cfg = RoundingConfig.uniform(4, 2, seed=9)
    a = round_sum_rand_orth([t], cfg)
    b = round_rand_orth(t, cfg)
    assert all(np.allclose(p, q, rtol=0, atol=1e-14) for p, q in zip(a.cores, b.cores))


@pytest.mark.parametrize("s", [2, 3, 5, 10])
def test_sum_path_equivalence(s):
    terms = _terms(s)
    cfg = RoundingConfig.uniform(4, 6, seed=4)
    a = round_sum_rand_orth(terms, cfg)
    b = round_rand_orth(add_all(terms), cfg)
    assert relative_error(a, b, "orth") <= 1e-10


def test_sketch_concatenation():
    terms = _terms(3)
    r = random_gaussian_tt(terms[0].dims, [4, 4, 4], 1)
    whole = partial_contractions_rl(add_all(terms), r)
    parts = [partial_contractions_rl(t, r) for t in terms]
    for n in range(1, 4):
        stacked = np.vstack([p[n] for p in parts])
        assert np.linalg.norm(whole[n] - stacked) <= 1e-13 * np.linalg.norm(stacked)


def test_sum_parallel_schedule_independent():
    terms = _terms(6)
    a = round_sum_rand_orth(terms, RoundingConfig.uniform(4, 5, seed=2))
    b = round_sum_rand_orth(terms, RoundingConfig.uniform(4, 5, seed=2, workers=4))
    assert all(np.array_equal(p, q) for p, q in zip(a.cores, b.cores))


def test_sum_errors():
    with pytest.raises(ValueError):
        round_sum_rand_orth([], RoundingConfig.uniform(3, 2))
    a = random_gaussian_tt([3, 3, 3], [2, 2], 0)
    b = random_gaussian_tt([3, 3, 4], [2, 2], 0)
    with pytest.raises(ValueError, match="dimension"):
        round_sum_rand_orth([a, b], RoundingConfig.uniform(3, 2))


def test_sum_adaptive_grows_saturated_sketch(rng):
    x, _ = low_rank_redundant(rng, [6, 6, 6, 6], 5, 10)
    terms = [x * 0.25, x * 0.25, x * 0.5]
    z = round_sum_adaptive(terms, 1e-10, guess=[2, 2, 2], seed=1)
    assert z.meta["attempts"] > 1
    assert not z.meta["saturated"]
    assert z.internal_ranks == (5, 5, 5)
    assert relative_error(z, x, "orth") < 1e-9


def test_sum_adaptive_respects_max_rank(rng):
    terms = _terms(4, rank=4)
    z = round_sum_adaptive(terms, 1e-14, guess=[2, 2, 2], max_rank=6)
    assert max(z.internal_ranks) <= 6
    assert z.meta["saturated"]


def test_right_orth_property_of_random_tensor_not_assumed(rng):
    # sanity: the sketch tensor is not orthogonal, the algorithms must not rely on it
    r = random_gaussian_tt([5, 5, 5], [3, 3], 0)
    h = h_unfold(r.cores[1])
    assert np.linalg.norm(h @ h.T - np.eye(3)) > 1e-3
