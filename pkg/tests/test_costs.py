import csv
import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randtt.costs import Algorithm, CostModel, coefficient, flops, speedup, speedup_csv, speedup_curve

# independent re-derivation: polynomial coefficients in (R^3, R^2 l, R l^2, l^3), times (N-2) I
TABLE = {
    "Orth": (5, 0, 0, 0),
    "Contr": (0, 2, 2, 0),
    "TTRound": (5, 6, 2, 0),
    "OrthRand": (5, 2, 4, 4),
    "RandOrth": (0, 4, 6, 4),
    "TwoSided": (0, 6, 6, 0),
}


def reference(alg, N, I, R, l, s=1):
    if alg == "SumRandOrth":
        return (N - 2) * I * (4 * s * R * R * l + 6 * s * R * l * l + 4 * l**3)
    a, b, c, d = TABLE[alg]
    return (N - 2) * I * (a * R**3 + b * R**2 * l + c * R * l**2 + d * l**3)


def test_beta_half_examples():
    assert coefficient("TTRound", 0.5) == 8.5
    assert coefficient("RandOrth", 0.5) == 4.0
    assert abs(speedup("RandOrth", 0.5) - 2.125) <= 1e-12


def test_beta_one_examples():
    assert coefficient("TwoSided", 1.0) == 12
    assert coefficient("TTRound", 1.0) == 13
    assert coefficient("RandOrth", 1.0) == 14
    assert speedup("RandOrth", 1.0) < 1


def test_contraction_cost_at_full_rank():
    assert flops(CostModel("Contr", 7, 11, 9, 9)) == 4 * 5 * 11 * 9**3


def test_invalid_parameters():
    with pytest.raises(ValueError):
        CostModel(Algorithm.ORTH, 5, 10, 10, 11)
    with pytest.raises(ValueError):
        CostModel(Algorithm.ORTH, 1, 10, 10, 5)
    with pytest.raises(ValueError):
        CostModel("Nope", 5, 10, 10, 5)
    with pytest.raises(ValueError):
        speedup_curve(5, 10, 10, [0.0])


@settings(max_examples=20, deadline=None)
@given(
    st.floats(0.01, 1.0),
    st.integers(3, 30),
    st.integers(2, 500),
    st.integers(1, 400),
    st.integers(1, 25),
)
def test_flops_match_rederivation(beta, N, I, R, s):
    l = beta * R
    for alg in Algorithm:
        got = flops(CostModel(alg, N, I, R, l, s))
        want = reference(alg.value, N, I, R, l, s)
        assert math.isclose(got, want, rel_tol=1e-12), alg
        assert got >= 0


def test_speedup_curve_shape():
    betas = [i / 20 for i in range(1, 21)]
    rows = speedup_curve(10, 100, 100, betas)
    ro = [r["RandOrth"] for r in rows]
    ts = [r["TwoSided"] for r in rows]
    assert all(a > b for a, b in zip(ro, ro[1:]))
    assert all(a > b for a, b in zip(ts, ts[1:]))
    assert all(v >= 1 for v in ts)
    for r in rows:
        if r["beta"] <= 0.5:
            assert r["OrthRand"] <= r["RandOrth"]
    half = next(r for r in rows if r["beta"] == 0.5)
    assert abs(half["RandOrth"] - 2.125) <= 1e-12


def test_speedup_csv_schema():
    text = speedup_csv(speedup_curve(5, 10, 10, [0.25, 0.5]))
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ["beta", "OrthRand", "RandOrth", "TwoSided"]
    assert float(rows[1]["RandOrth"]) == 2.125
