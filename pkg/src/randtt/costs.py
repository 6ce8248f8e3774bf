"""Leading-order flop counts for the rounding algorithms.

All counts assume an order-``N`` tensor with every mode of size ``I`` and
internal ranks ``R`` rounded to internal ranks ``l``; lower-order terms
(``O(I R^2 + N R^3)`` and smaller) are dropped.  ``SumRandOrth`` rounds a sum
of ``s`` such tensors, each of rank ``R``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class Algorithm(str, Enum):
    ORTH = "Orth"
    CONTR = "Contr"
    TT_ROUND = "TTRound"
    ORTH_RAND = "OrthRand"
    RAND_ORTH = "RandOrth"
    TWO_SIDED = "TwoSided"
    SUM_RAND_ORTH = "SumRandOrth"


@dataclass(frozen=True)
class CostModel:
    algorithm: Algorithm
    N: int
    I: int
    R: float
    ell: float
    s: int = 1

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.N < 2 or self.I < 1 or self.R <= 0 or self.ell <= 0 or self.s < 1:
            raise ValueError(f"invalid cost parameters: {self}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta = ell / R must lie in (0, 1], got {self.beta}")

    @property
    def beta(self) -> float:
        return self.ell / self.R


def _per_mode(alg: Algorithm, R: float, l: float, s: int) -> float:
    if alg is Algorithm.ORTH:
        return 5 * R**3
    if alg is Algorithm.CONTR:
        return 2 * R**2 * l + 2 * R * l**2
    if alg is Algorithm.TT_ROUND:
        return 5 * R**3 + 6 * R**2 * l + 2 * R * l**2
    if alg is Algorithm.ORTH_RAND:
        return 5 * R**3 + 2 * R**2 * l + 4 * R * l**2 + 4 * l**3
    if alg is Algorithm.RAND_ORTH:
        return 4 * R**2 * l + 6 * R * l**2 + 4 * l**3
    if alg is Algorithm.TWO_SIDED:
        return 6 * R**2 * l + 6 * R * l**2
    if alg is Algorithm.SUM_RAND_ORTH:
        return 4 * s * R**2 * l + 6 * s * R * l**2 + 4 * l**3
    raise ValueError(alg)


def flops(model: CostModel) -> float:
    return (model.N - 2) * model.I * _per_mode(model.algorithm, model.R, model.ell, model.s)


def coefficient(alg: Algorithm | str, beta: float, s: int = 1) -> float:
    """Cost in units of ``(N - 2) I R^3`` as a function of ``beta = l / R``."""
    return _per_mode(Algorithm(alg), 1.0, beta, s)


def speedup(alg: Algorithm | str, beta: float) -> float:
    """Predicted speedup of ``alg`` over deterministic TT-rounding."""
    return coefficient(Algorithm.TT_ROUND, beta) / coefficient(alg, beta)


SPEEDUP_ALGS = (Algorithm.ORTH_RAND, Algorithm.RAND_ORTH, Algorithm.TWO_SIDED)


def speedup_curve(N: int, I: int, R: float, betas: Iterable[float]) -> list[dict]:
    rows = []
    for b in betas:
        if not 0 < b <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {b}")
        base = flops(CostModel(Algorithm.TT_ROUND, N, I, R, b * R))
        row = {"beta": b}
        for alg in SPEEDUP_ALGS:
            row[alg.value] = base / flops(CostModel(alg, N, I, R, b * R))
        rows.append(row)
    return rows


def speedup_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["beta"] + [a.value for a in SPEEDUP_ALGS], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) for k, v in r.items()})
    return buf.getvalue()
