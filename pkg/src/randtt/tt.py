"""Tensor-Train containers and basic arithmetic.

Cores are stored as C-contiguous float64 arrays of shape
``(r_left, mode_dim, r_right)``.  With that layout the horizontal unfolding
``core.reshape(r_left, mode_dim * r_right)`` is a view whose column block
``[i * r_right, (i + 1) * r_right)`` is slice ``i``.  Kernels in this package
use the companion view ``core.reshape(r_left * mode_dim, r_right)`` as the
vertical unfolding; it differs from the slice-stacked unfolding returned by
:func:`v_unfold` only by a fixed row permutation, which none of the
orthogonalization or sketching steps can see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "TT",
    "Violation",
    "validate",
    "entry",
    "full",
    "h_unfold",
    "v_unfold",
    "h_fold",
    "v_fold",
    "add",
    "add_all",
    "scale",
    "mode_mult",
    "norm",
    "inner",
    "zeros",
    "ones",
    "random_gaussian_tt",
    "relative_error",
    "reverse",
    "FULL_CAP",
]

FULL_CAP = 10**7


@dataclass(frozen=True)
class Violation:
    core: int
    constraint: str

    def __str__(self) -> str:
        return f"core {self.core}: {self.constraint}"


class TT:
    """A tensor in TT format.

    Instances are treated as immutable: cores are frozen (``writeable=False``)
    and every operation in the package returns a fresh object.  ``meta`` holds
    diagnostics such as rank-capping warnings; it does not take part in any
    arithmetic.
    """

    __slots__ = ("cores", "meta")

    def __init__(self, cores: Sequence[np.ndarray], meta: dict | None = None, check: bool = True):
        frozen = []
        for c in cores:
            a = np.ascontiguousarray(c, dtype=np.float64)
            if a is c:
                a = a.copy()
            a.flags.writeable = False
            frozen.append(a)
        self.cores = tuple(frozen)
        self.meta = dict(meta) if meta else {}
        if check:
            v = validate(self)
            if v is not None:
                raise ValueError(f"invalid TT tensor: {v}")

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        """Bond ranks ``(R_0, ..., R_N)`` including the unit boundaries."""
        return (self.cores[0].shape[0],) + tuple(c.shape[2] for c in self.cores)

    @property
    def internal_ranks(self) -> tuple[int, ...]:
        return self.ranks[1:-1]

    @property
    def size(self) -> int:
        """Number of stored floats."""
        return sum(c.size for c in self.cores)

    def __repr__(self) -> str:
        return f"TT(dims={self.dims}, ranks={self.ranks})"

    def __add__(self, other: "TT") -> "TT":
        return add(self, other)

    def __sub__(self, other: "TT") -> "TT":
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "TT":
        return scale(self, -1.0)

    def __mul__(self, alpha: float) -> "TT":
        return scale(self, alpha)

    __rmul__ = __mul__


def validate(tt: TT) -> Violation | None:
    """Return ``None`` if ``tt`` is a well-formed TT tensor, else the first violation."""
    cores = tt.cores
    if len(cores) < 2:
        return Violation(0, f"need at least 2 cores, got {len(cores)}")
    for n, c in enumerate(cores):
        if c.ndim != 3:
            return Violation(n, f"core must be 3-dimensional, got ndim={c.ndim}")
        if min(c.shape) < 1:
            return Violation(n, f"all extents must be >= 1, got {c.shape}")
        if not np.all(np.isfinite(c)):
            return Violation(n, "non-finite entry")
    if cores[0].shape[0] != 1:
        return Violation(0, f"boundary rank R_0 must be 1, got {cores[0].shape[0]}")
    if cores[-1].shape[2] != 1:
        return Violation(len(cores) - 1, f"boundary rank R_N must be 1, got {cores[-1].shape[2]}")
    for n in range(len(cores) - 1):
        if cores[n].shape[2] != cores[n + 1].shape[0]:
            return Violation(
                n + 1,
                f"bond {n + 1} mismatch: r_right={cores[n].shape[2]} vs r_left={cores[n + 1].shape[0]}",
            )
    return None


def _check_dims(x: TT, y: TT) -> None:
    if x.dims != y.dims:
        raise ValueError(f"dimension mismatch: {x.dims} vs {y.dims}")


def entry(tt: TT, idx: Sequence[int]) -> float:
    """Evaluate one entry (0-based multi-index) as a product of core slices."""
    if len(idx) != tt.order:
        raise IndexError(f"index of length {len(idx)} for order-{tt.order} tensor")
    v = np.ones((1, 1))
    for n, (c, i) in enumerate(zip(tt.cores, idx)):
        if not 0 <= i < c.shape[1]:
            raise IndexError(f"index {i} out of bounds for mode {n} of size {c.shape[1]}")
        v = v @ c[:, i, :]
    return float(v[0, 0])


def full(tt: TT, cap: int = FULL_CAP) -> np.ndarray:
    """Materialize the dense tensor (testing oracle only)."""
    total = math.prod(tt.dims)
    if total > cap:
        raise MemoryError(f"dense tensor has {total} entries, cap is {cap}")
    out = tt.cores[0].reshape(tt.dims[0], -1)
    for c in tt.cores[1:]:
        out = out @ c.reshape(c.shape[0], -1)
        out = out.reshape(-1, c.shape[2])
    return out.reshape(tt.dims)


def h_unfold(core: np.ndarray) -> np.ndarray:
    r0, m, r1 = core.shape
    return core.reshape(r0, m * r1)


def v_unfold(core: np.ndarray) -> np.ndarray:
    """Vertical unfolding with slice ``i`` occupying rows ``[i*r_left, (i+1)*r_left)``."""
    r0, m, r1 = core.shape
    return core.transpose(1, 0, 2).reshape(m * r0, r1)


def h_fold(mat: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    r0, m, r1 = shape
    if mat.shape != (r0, m * r1):
        raise ValueError(f"cannot fold {mat.shape} into core of shape {shape}")
    return mat.reshape(shape)


def v_fold(mat: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    r0, m, r1 = shape
    if mat.shape != (m * r0, r1):
        raise ValueError(f"cannot fold {mat.shape} into core of shape {shape}")
    return mat.reshape(m, r0, r1).transpose(1, 0, 2).copy()


def mode_mult(core: np.ndarray, mat: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product (1-based) of an order-3 core with a matrix."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[None, :]
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    k = core.shape[mode - 1]
    if mat.shape[1] != k:
        raise ValueError(f"matrix with {mat.shape[1]} columns cannot act on extent {k} of mode {mode}")
    r0, m, r1 = core.shape
    if mode == 1:
        return (mat @ core.reshape(r0, m * r1)).reshape(mat.shape[0], m, r1)
    if mode == 3:
        return (core.reshape(r0 * m, r1) @ mat.T).reshape(r0, m, mat.shape[0])
    return np.einsum("ij,ajb->aib", mat, core, optimize=True)


def add(y: TT, z: TT) -> TT:
    """Exact sum; internal ranks add up."""
    return add_all([y, z])


def add_all(terms: Sequence[TT], coeffs: Sequence[float] | None = None) -> TT:
    """Assemble ``sum_j coeffs[j] * terms[j]`` with block-diagonal middle cores."""
    if not terms:
        raise ValueError("need at least one term")
    for t in terms[1:]:
        _check_dims(terms[0], t)
    if coeffs is None:
        coeffs = [1.0] * len(terms)
    N = terms[0].order
    cores = []
    for n in range(N):
        blocks = [t.cores[n] for t in terms]
        if n == 0:
            blocks = [a * b for a, b in zip(coeffs, blocks)]
            cores.append(np.concatenate(blocks, axis=2))
        elif n == N - 1:
            cores.append(np.concatenate(blocks, axis=0))
        else:
            r0 = sum(b.shape[0] for b in blocks)
            r1 = sum(b.shape[2] for b in blocks)
            c = np.zeros((r0, blocks[0].shape[1], r1))
            i0 = i1 = 0
            for b in blocks:
                c[i0:i0 + b.shape[0], :, i1:i1 + b.shape[2]] = b
                i0 += b.shape[0]
                i1 += b.shape[2]
            cores.append(c)
    return TT(cores, check=False)


def scale(tt: TT, alpha: float) -> TT:
    cores = list(tt.cores)
    cores[0] = cores[0] * alpha
    return TT(cores, check=False)


def zeros(dims: Sequence[int]) -> TT:
    """Canonical zero tensor: all ranks 1, zero cores."""
    return TT([np.zeros((1, d, 1)) for d in dims])


def ones(dims: Sequence[int]) -> TT:
    return TT([np.ones((1, d, 1)) for d in dims])


def reverse(tt: TT) -> TT:
    """Mode-reversed tensor: ``reverse(X)[i_N, ..., i_1] == X[i_1, ..., i_N]``."""
    return TT([c.transpose(2, 1, 0) for c in reversed(tt.cores)], check=False)


def norm(tt: TT) -> float:
    """Frobenius norm via right-to-left orthogonalization."""
    from .deterministic import orthogonalize_rl

    return float(np.linalg.norm(orthogonalize_rl(tt).cores[0]))


def inner(x: TT, y: TT) -> float:
    _check_dims(x, y)
    w = np.ones((1, 1))
    for cx, cy in zip(reversed(x.cores), reversed(y.cores)):
        r0, m, _ = cx.shape
        z = (cx.reshape(-1, cx.shape[2]) @ w).reshape(r0, -1)
        w = z @ cy.reshape(cy.shape[0], -1).T
    return float(w[0, 0])


def random_gaussian_tt(dims: Sequence[int], ranks: Sequence[int], seed, stream: int = 0) -> TT:
    """Random Gaussian TT tensor with core variance ``1 / (l_{n-1} I_n l_n)``.

    ``ranks`` are the ``N - 1`` internal ranks.  Core ``n`` is drawn from a
    generator keyed on ``(seed, stream, n)`` so tensors with different
    ``stream`` values are independent for a common seed.
    """
    dims = list(dims)
    ranks = list(ranks)
    if len(ranks) != len(dims) - 1:
        raise ValueError(f"need {len(dims) - 1} internal ranks, got {len(ranks)}")
    if any(r < 1 for r in ranks):
        raise ValueError(f"ranks must be positive, got {ranks}")
    full_ranks = [1] + ranks + [1]
    key = list(np.atleast_1d(seed).astype(np.int64)) + [stream]
    cores = []
    for n, d in enumerate(dims):
        shape = (full_ranks[n], d, full_ranks[n + 1])
        rng = np.random.default_rng(key + [n])
        cores.append(rng.standard_normal(shape) / math.sqrt(math.prod(shape)))
    return TT(cores, check=False)


def relative_error(x: TT, y: TT, method: str = "gram") -> float:
    """``||x - y|| / ||y||``.

    ``method="gram"`` expands the squared norm into inner products, clamping
    negative values from cancellation at zero; its resolution is limited to
    about ``sqrt(machine eps)``.  ``method="orth"`` forms ``x - y`` in TT
    format and takes its norm by orthogonalization, which resolves errors
    down to roughly machine precision.
    """
    _check_dims(x, y)
    if method == "gram":
        yy = inner(y, y)
        if yy <= 0.0:
            raise ZeroDivisionError("reference tensor has zero norm")
        d2 = inner(x, x) - 2.0 * inner(x, y) + yy
        return math.sqrt(max(d2, 0.0) / yy)
    if method == "orth":
        ny = norm(y)
        if ny == 0.0:
            raise ZeroDivisionError("reference tensor has zero norm")
        return norm(add_all([x, y], [1.0, -1.0])) / ny
    raise ValueError(f"unknown method {method!r}")
