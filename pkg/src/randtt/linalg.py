"""Dense factorizations and sketching primitives used by every rounding routine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "QRFactors",
    "LowRankSVD",
    "thin_qr",
    "svd",
    "svd_trunc",
    "svd_trunc_rank",
    "truncation_rank",
    "gaussian_matrix",
    "pinv_sqrt_factors",
    "SketchRankError",
]


class SketchRankError(np.linalg.LinAlgError):
    """Raised when a two-sided sketch carries no information (numerically zero)."""


@dataclass(frozen=True)
class QRFactors:
    Q: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class LowRankSVD:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    threshold_used: float

    @property
    def rank(self) -> int:
        return self.S.shape[0]


def thin_qr(A: np.ndarray, allow_wide: bool = False) -> QRFactors:
    """Householder thin QR with explicitly formed Q (LAPACK geqrf/orgqr).

    For ``m < n`` the factorization is only defined with ``allow_wide=True``,
    in which case Q is ``m x m`` and R is ``m x n`` upper trapezoidal.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if m < n and not allow_wide:
        raise ValueError(f"thin QR needs m >= n, got {m} x {n}")
    Q, R = scipy.linalg.qr(A, mode="economic", check_finite=False)
    return QRFactors(Q, R)


def svd(A: np.ndarray):
    """Economy SVD; falls back to the QR-iteration driver if divide-and-conquer fails."""
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")


def truncation_rank(S: np.ndarray, eps: float) -> int:
    """Smallest k >= 1 whose discarded tail has root-sum-square <= eps."""
    # tail[k] = sqrt(sum_{i >= k} S_i^2)
    tail2 = np.concatenate([np.cumsum((S**2)[::-1])[::-1], [0.0]])
    k = int(np.argmax(tail2 <= eps * eps))
    return max(k, 1)


def svd_trunc(A: np.ndarray, eps: float) -> LowRankSVD:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    U, S, Vt = svd(A)
    k = truncation_rank(S, eps)
    return LowRankSVD(U[:, :k], S[:k], Vt[:k].T, eps)


def svd_trunc_rank(A: np.ndarray, k: int) -> LowRankSVD:
    if not 1 <= k <= min(A.shape):
        raise ValueError(f"rank {k} outside [1, {min(A.shape)}]")
    U, S, Vt = svd(A)
    tail = float(np.sqrt(np.sum(S[k:] ** 2)))
    return LowRankSVD(U[:, :k], S[:k], Vt[:k].T, tail)


def gaussian_matrix(m: int, n: int, variance: float = 1.0, seed=None) -> np.ndarray:
    if variance <= 0:
        raise ValueError("variance must be positive")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, n)) * np.sqrt(variance)


def pinv_sqrt_factors(Wl: np.ndarray, Wr: np.ndarray, delta: float = 1e-12):
    """Split ``Wr (Wl Wr)^+ Wl`` into ``L @ Rm`` through balanced square roots.

    With ``Wl Wr = U diag(s) V^T``, singular values ``s_i <= delta * s_max``
    are treated as zero, and
    ``L = Wr V s^{-1/2}``, ``Rm = s^{-1/2} U^T Wl`` on the retained triplets.
    """
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    U, S, Vt = svd(Wl @ Wr)
    if S.size == 0 or S[0] == 0.0:
        raise SketchRankError("sketch product is identically zero")
    k = int(np.count_nonzero(S > delta * S[0]))
    root = 1.0 / np.sqrt(S[:k])
    L = (Wr @ Vt[:k].T) * root
    Rm = root[:, None] * (U[:, :k].T @ Wl)
    return L, Rm
