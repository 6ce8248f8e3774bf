"""Randomized TT-rounding: one-sided, two-sided, and structured rounding of sums."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .deterministic import orthogonalize_rl, partial_contractions_lr, partial_contractions_rl, truncate_left_orthogonal
from .linalg import SketchRankError, gaussian_matrix, pinv_sqrt_factors, thin_qr
from .tt import TT, random_gaussian_tt

__all__ = [
    "RoundingConfig",
    "cap_ranks",
    "default_left_ranks",
    "round_orth_rand",
    "round_rand_orth",
    "round_rand_orth_adaptive",
    "round_two_sided",
    "round_sum_rand_orth",
    "round_sum_adaptive",
]


@dataclass(frozen=True)
class RoundingConfig:
    """Parameters shared by the randomized rounding routines.

    ``target`` holds the internal ranks ``l_1 .. l_{N-1}`` and already
    includes any oversampling.  ``left_ranks`` is only read by
    :func:`round_two_sided`; when omitted it defaults to ``ceil(1.5 * l_n)``.
    """

    target: tuple
    seed: int = 0
    left_ranks: tuple | None = None
    nystrom_cutoff: float = 1e-12
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "target", tuple(int(r) for r in self.target))
        if any(r < 1 for r in self.target):
            raise ValueError(f"target ranks must be >= 1, got {self.target}")
        if self.left_ranks is not None:
            lr = tuple(int(r) for r in self.left_ranks)
            if len(lr) != len(self.target):
                raise ValueError("left_ranks and target must have the same length")
            if any(a < b for a, b in zip(lr, self.target)):
                raise ValueError(f"left_ranks {lr} must be >= target {self.target}")
            object.__setattr__(self, "left_ranks", lr)

    @classmethod
    def uniform(cls, order: int, rank: int, **kw) -> "RoundingConfig":
        return cls(target=(rank,) * (order - 1), **kw)


def default_left_ranks(target: Sequence[int]) -> tuple:
    return tuple(math.ceil(1.5 * r) for r in target)


def cap_ranks(target: Sequence[int], dims: Sequence[int], input_ranks: Sequence[int]) -> tuple[tuple, bool]:
    """Clip target ranks to what the unfoldings and the input can support.

    Enforces ``l_n <= R_n``, ``l_n <= l_{n-1} I_n`` and ``l_n <= I_{n+1} l_{n+1}``
    (with ``l_0 = l_N = 1``).  Returns the clipped ranks and whether anything
    changed.
    """
    N = len(dims)
    if len(target) != N - 1:
        raise ValueError(f"need {N - 1} target ranks, got {len(target)}")
    l = [1] + [min(int(t), int(r)) for t, r in zip(target, input_ranks)] + [1]
    changed = True
    while changed:
        changed = False
        for n in range(1, N):
            c = min(l[n], l[n - 1] * dims[n - 1])
            if c != l[n]:
                l[n], changed = c, True
        for n in range(N - 1, 0, -1):
            c = min(l[n], l[n + 1] * dims[n])
            if c != l[n]:
                l[n], changed = c, True
    capped = tuple(l[1:-1])
    return capped, capped != tuple(int(t) for t in target)


def _meta(requested, used) -> dict:
    meta = {"target_ranks": tuple(requested), "used_ranks": tuple(used)}
    if tuple(requested) != tuple(used):
        meta["rank_capped"] = True
    return meta


def round_orth_rand(y: TT, cfg: RoundingConfig) -> TT:
    """Orthogonalize-then-Randomize: right-orthogonalize, then a randomized range finder per bond."""
    ell, _ = cap_ranks(cfg.target, y.dims, y.internal_ranks)
    x = list(orthogonalize_rl(y).cores)
    for n in range(y.order - 1):
        c = x[n]
        r0, m, r1 = c.shape
        z = c.reshape(r0 * m, r1)
        omega = gaussian_matrix(r1, ell[n], 1.0, seed=[cfg.seed, 2, n])
        q = thin_qr(z @ omega, allow_wide=True).Q
        k = q.shape[1]
        x[n] = q.reshape(r0, m, k)
        nxt = x[n + 1]
        x[n + 1] = ((q.T @ z) @ nxt.reshape(r1, -1)).reshape(k, nxt.shape[1], nxt.shape[2])
    return TT(x, meta=_meta(cfg.target, ell), check=False)


def round_rand_orth(y: TT, cfg: RoundingConfig) -> TT:
    """Randomize-then-Orthogonalize.  The result is left-orthogonal."""
    ell, _ = cap_ranks(cfg.target, y.dims, y.internal_ranks)
    r = random_gaussian_tt(y.dims, ell, cfg.seed)
    w = partial_contractions_rl(y, r)
    x = list(y.cores)
    for n in range(y.order - 1):
        c = x[n]
        r0, m, r1 = c.shape
        z = c.reshape(r0 * m, r1)
        q = thin_qr(z @ w[n + 1], allow_wide=True).Q
        k = q.shape[1]
        x[n] = q.reshape(r0, m, k)
        nxt = x[n + 1]
        x[n + 1] = ((q.T @ z) @ nxt.reshape(r1, -1)).reshape(k, nxt.shape[1], nxt.shape[2])
    return TT(x, meta=_meta(cfg.target, ell), check=False)


def round_rand_orth_adaptive(y: TT, guess: Sequence[int], eps0: float, seed: int = 0) -> TT:
    """Randomize-then-Orthogonalize at generous ranks, then deterministic truncation at ``eps0``.

    The error against ``y`` is the sketching error plus at most
    ``eps0 * ||sketch||``; only the second part is controlled.
    """
    x = round_rand_orth(y, RoundingConfig(target=tuple(guess), seed=seed))
    out = truncate_left_orthogonal(x, eps0)
    out.meta.update(x.meta)
    return out


def round_two_sided(y: TT, cfg: RoundingConfig) -> TT:
    """Two-sided randomization (generalized Nystrom); the output is not orthogonal.

    Raises :class:`SketchRankError` naming the bond whose two-sided sketch
    vanishes.  Bonds whose sketch is numerically rank deficient (relative
    cutoff ``cfg.nystrom_cutoff``) come out with the reduced rank.
    """
    ell, _ = cap_ranks(cfg.target, y.dims, y.internal_ranks)
    rho = cfg.left_ranks if cfg.left_ranks is not None else default_left_ranks(cfg.target)
    rho = tuple(max(a, b) for a, b in zip(rho, ell))
    left = random_gaussian_tt(y.dims, ell, cfg.seed, stream=1)
    right = random_gaussian_tt(y.dims, rho, cfg.seed, stream=0)
    wl = partial_contractions_lr(y, left)
    wr = partial_contractions_rl(y, right)
    lf, rf = [], []
    for n in range(1, y.order):
        try:
            a, b = pinv_sqrt_factors(wl[n], wr[n], cfg.nystrom_cutoff)
        except SketchRankError as exc:
            raise SketchRankError(f"bond {n}: {exc}") from None
        lf.append(a)
        rf.append(b)
    N = y.order
    cores = []
    for n in range(N):
        c = y.cores[n]
        if n > 0:
            c = (rf[n - 1] @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[1], c.shape[2])
        if n < N - 1:
            c = (c.reshape(-1, c.shape[2]) @ lf[n]).reshape(c.shape[0], c.shape[1], -1)
        cores.append(c)
    used = tuple(a.shape[1] for a in lf)
    meta = _meta(cfg.target, used)
    meta["left_ranks"] = rho
    return TT(cores, meta=meta, check=False)


def _sketch_terms(terms, r, workers):
    if workers and workers > 1 and len(terms) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda t: partial_contractions_rl(t, r), terms))
    return [partial_contractions_rl(t, r) for t in terms]


def round_sum_rand_orth(terms: Sequence[TT], cfg: RoundingConfig) -> TT:
    """Randomize-then-Orthogonalize applied to ``sum(terms)`` without assembling it.

    Per-term sketches are stacked in term order, so the result does not depend
    on how the sketches were scheduled.  Only the current core of the sum,
    of shape ``(l_{n-1}, I_n, sum_j R_n^(j))``, is ever held in memory.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    dims = terms[0].dims
    for t in terms[1:]:
        if t.dims != dims:
            raise ValueError(f"dimension mismatch among terms: {dims} vs {t.dims}")
    N = len(dims)
    sum_ranks = [sum(t.ranks[n] for t in terms) for n in range(1, N)]
    ell, _ = cap_ranks(cfg.target, dims, sum_ranks)
    r = random_gaussian_tt(dims, ell, cfg.seed)
    sketches = _sketch_terms(terms, r, cfg.workers)

    out = []
    cur = np.concatenate([t.cores[0] for t in terms], axis=2)
    for n in range(N - 1):
        r0, m, rs = cur.shape
        z = cur.reshape(r0 * m, rs)
        w = np.vstack([sk[n + 1] for sk in sketches])
        q = thin_qr(z @ w, allow_wide=True).Q
        k = q.shape[1]
        out.append(q.reshape(r0, m, k))
        mm = q.T @ z
        splits = np.cumsum([t.ranks[n + 1] for t in terms])[:-1]
        blocks = np.split(mm, splits, axis=1)
        if n < N - 2:
            cur = np.concatenate(
                [(b @ t.cores[n + 1].reshape(b.shape[1], -1)).reshape(k, -1, t.ranks[n + 2]) for b, t in zip(blocks, terms)],
                axis=2,
            )
        else:
            last = sum(b @ t.cores[N - 1].reshape(b.shape[1], -1) for b, t in zip(blocks, terms))
            out.append(last.reshape(k, dims[-1], 1))
    return TT(out, meta=_meta(cfg.target, ell), check=False)


def round_sum_adaptive(
    terms: Sequence[TT],
    eps0: float,
    guess: Sequence[int],
    seed: int = 0,
    max_rank: int | None = None,
    max_tries: int = 6,
) -> TT:
    """Structured sum rounding with unknown output ranks.

    Sketches at ``guess``, truncates at relative tolerance ``eps0``, and
    doubles the sketch rank on any bond where truncation kept every sketched
    direction (a saturated sketch), until no bond saturates or the bond hits
    its cap.  ``meta`` records the number of attempts, the final sketch ranks and
    ``saturated``, which is true when ``max_rank`` or ``max_tries`` stopped the
    growth before the sketch captured every retained direction.
    """
    terms = list(terms)
    dims = terms[0].dims
    N = len(dims)
    sum_ranks = [sum(t.ranks[n] for t in terms) for n in range(1, N)]
    natural, _ = cap_ranks(sum_ranks, dims, sum_ranks)
    caps = tuple(r if max_rank is None else min(r, max_rank) for r in natural)
    ell, _ = cap_ranks([max(1, int(g)) for g in guess], dims, caps)
    for attempt in range(1, max_tries + 1):
        cfg = RoundingConfig(target=ell, seed=seed + 7919 * (attempt - 1))
        x = round_sum_rand_orth(terms, cfg)
        used = x.internal_ranks
        out = truncate_left_orthogonal(x, eps0)
        got = out.internal_ranks
        grow = [n for n in range(N - 1) if got[n] >= used[n] and used[n] < caps[n]]
        if not grow:
            break
        nxt = list(ell)
        for n in grow:
            nxt[n] = min(2 * nxt[n], caps[n])
        ell, _ = cap_ranks(nxt, dims, caps)
    # a bond that kept every sketched direction below its natural cap may have lost accuracy
    saturated = any(got[n] >= used[n] and used[n] < natural[n] for n in range(N - 1))
    out.meta.update({"attempts": attempt, "sketch_ranks": tuple(used), "saturated": saturated})
    return out
