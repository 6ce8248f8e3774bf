"""Orthogonalization sweeps, deterministic TT-rounding and partial contractions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import svd, thin_qr, truncation_rank
from .tt import TT, reverse

__all__ = [
    "SketchSet",
    "orthogonalize_rl",
    "orthogonalize_lr",
    "tt_round",
    "truncate_left_orthogonal",
    "partial_contractions_rl",
    "partial_contractions_lr",
]


@dataclass(frozen=True)
class SketchSet:
    """Partial contraction matrices ``W_1 .. W_{N-1}`` (``mats[n-1]`` is ``W_n``).

    ``side="right"``: ``W_n = H(X^{n+1:N}) H(Y^{n+1:N})^T``.
    ``side="left"``:  ``W_n = V(L^{1:n})^T V(X^{1:n})``.
    ``terminal`` is the fully contracted scalar, i.e. the inner product.
    """

    side: str
    mats: tuple
    terminal: float

    def __getitem__(self, n: int) -> np.ndarray:
        return self.mats[n - 1]

    def __len__(self) -> int:
        return len(self.mats)


def orthogonalize_rl(y: TT) -> TT:
    """Right-orthogonal representation of ``y``.

    Horizontal unfoldings of cores 2..N end up with orthonormal rows; the
    first core carries the norm.  A bond is narrowed to ``I_n R_n`` when the
    incoming rank exceeds it.
    """
    cores = list(y.cores)
    for n in range(len(cores) - 1, 0, -1):
        c = cores[n]
        r0, m, r1 = c.shape
        f = thin_qr(c.reshape(r0, m * r1).T, allow_wide=True)
        k = f.Q.shape[1]
        cores[n] = f.Q.T.reshape(k, m, r1)
        p = cores[n - 1]
        cores[n - 1] = (p.reshape(-1, r0) @ f.R.T).reshape(p.shape[0], p.shape[1], k)
    return TT(cores, check=False)


def orthogonalize_lr(y: TT) -> TT:
    """Left-orthogonal representation; the last core carries the norm."""
    return reverse(orthogonalize_rl(reverse(y)))


def _truncate_sweep(x: list, eps: float, ranks: Sequence[int] | None) -> list:
    # x must be right-orthogonal; left-to-right QR + truncated SVD sweep.
    N = len(x)
    for n in range(N - 1):
        c = x[n]
        r0, m, r1 = c.shape
        f = thin_qr(c.reshape(r0 * m, r1), allow_wide=True)
        U, S, _ = svd(f.R)
        k = truncation_rank(S, eps)
        if ranks is not None:
            k = min(k, int(ranks[n]))
        x[n] = (f.Q @ U[:, :k]).reshape(r0, m, k)
        # U_k^T R equals S_k V_k^T in exact arithmetic but is an orthogonal
        # projection of R in floating point, which avoids the SVD's
        # reconstruction error at bonds with nothing to truncate.
        sv = U[:, :k].T @ f.R
        nxt = x[n + 1]
        x[n + 1] = (sv @ nxt.reshape(nxt.shape[0], -1)).reshape(k, nxt.shape[1], nxt.shape[2])
    return x


def tt_round(y: TT, eps0: float = 0.0, ranks: Sequence[int] | None = None) -> TT:
    """TT-rounding by orthogonalization then truncated SVDs.

    Each of the ``N - 1`` bonds drops singular values whose root-sum-square
    stays below ``eps0 * ||y|| / sqrt(N - 1)``, which gives
    ``||result - y|| <= eps0 * ||y||``.  Passing ``ranks`` additionally caps
    bond ``n`` at ``ranks[n-1]`` (fixed-rank rounding; the error guarantee
    no longer applies).
    """
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    if ranks is not None and len(ranks) != y.order - 1:
        raise ValueError(f"need {y.order - 1} target ranks, got {len(ranks)}")
    x = list(orthogonalize_rl(y).cores)
    nrm = float(np.linalg.norm(x[0]))
    eps = nrm * eps0 / math.sqrt(y.order - 1)
    return TT(_truncate_sweep(x, eps, ranks), check=False)


def truncate_left_orthogonal(x: TT, eps0: float = 0.0, ranks: Sequence[int] | None = None) -> TT:
    """Truncation sweep for an already left-orthogonal tensor (no orthogonalization).

    The sweep runs right to left, mirroring :func:`tt_round`'s compression
    phase; the norm is read off the last core.
    """
    xr = list(reverse(x).cores)
    nrm = float(np.linalg.norm(xr[0]))
    eps = nrm * eps0 / math.sqrt(x.order - 1)
    rr = None if ranks is None else list(ranks)[::-1]
    return reverse(TT(_truncate_sweep(xr, eps, rr), check=False))


def partial_contractions_rl(x: TT, y: TT) -> SketchSet:
    """Right-to-left partial contractions ``W_n = H(X^{n+1:N}) H(Y^{n+1:N})^T``."""
    if x.dims != y.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {y.dims}")
    N = x.order
    mats = [None] * (N - 1)
    cx, cy = x.cores[-1], y.cores[-1]
    w = cx.reshape(cx.shape[0], -1) @ cy.reshape(cy.shape[0], -1).T
    mats[N - 2] = w
    for n in range(N - 2, -1, -1):
        cx, cy = x.cores[n], y.cores[n]
        r0, m, _ = cx.shape
        z = (cx.reshape(r0 * m, -1) @ w).reshape(r0, -1)
        w = z @ cy.reshape(cy.shape[0], -1).T
        if n > 0:
            mats[n - 1] = w
    return SketchSet("right", tuple(mats), float(w[0, 0]))


def partial_contractions_lr(x: TT, left: TT) -> SketchSet:
    """Left-to-right partial contractions ``W_n^L = V(L^{1:n})^T V(X^{1:n})``."""
    if x.dims != left.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {left.dims}")
    N = x.order
    mats = []
    w = np.ones((1, 1))
    for n in range(N):
        cx, cl = x.cores[n], left.cores[n]
        _, m, r1 = cx.shape
        z = (w @ cx.reshape(cx.shape[0], -1)).reshape(-1, r1)
        w = cl.reshape(-1, cl.shape[2]).T @ z
        if n < N - 1:
            mats.append(w)
    return SketchSet("left", tuple(mats), float(w[0, 0]))
