"""Randomized and deterministic rounding of tensors in Tensor-Train format."""

from .deterministic import (
    orthogonalize_lr,
    orthogonalize_rl,
    partial_contractions_lr,
    partial_contractions_rl,
    truncate_left_orthogonal,
    tt_round,
)
from .gmres import GmresConfig, KroneckerSumOperator, build_cookie_surrogate, tt_gmres
from .linalg import SketchRankError
from .randomized import (
    RoundingConfig,
    round_orth_rand,
    round_rand_orth,
    round_rand_orth_adaptive,
    round_sum_adaptive,
    round_sum_rand_orth,
    round_two_sided,
)
from .tt import TT, add, add_all, full, inner, norm, random_gaussian_tt, relative_error

__version__ = "0.1.0"

__all__ = [
    "orthogonalize_lr",
    "orthogonalize_rl",
    "partial_contractions_lr",
    "partial_contractions_rl",
    "truncate_left_orthogonal",
    "tt_round",
    "GmresConfig",
    "KroneckerSumOperator",
    "build_cookie_surrogate",
    "tt_gmres",
    "SketchRankError",
    "RoundingConfig",
    "round_orth_rand",
    "round_rand_orth",
    "round_rand_orth_adaptive",
    "round_sum_adaptive",
    "round_sum_rand_orth",
    "round_two_sided",
    "TT",
    "add",
    "add_all",
    "full",
    "inner",
    "norm",
    "random_gaussian_tt",
    "relative_error",
]
