"""Kronecker-sum operators in TT form and an inexact, right-preconditioned TT-GMRES."""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .deterministic import tt_round
from .randomized import round_sum_adaptive
from .tt import TT, add_all, inner, norm, ones, scale

__all__ = [
    "KroneckerSumOperator",
    "GmresConfig",
    "GmresTrace",
    "MeanPreconditioner",
    "apply_operator",
    "operator_terms",
    "apply_preconditioner",
    "tt_gmres",
    "build_cookie_surrogate",
    "fd_laplacian",
    "operator_from_json",
    "operator_to_json",
]


def _factor_dense(f, n: int) -> np.ndarray:
    if f is None:
        return np.eye(n)
    f = np.asarray(f, dtype=np.float64)
    return np.diag(f) if f.ndim == 1 else f


class KroneckerSumOperator:
    """``sum_i A_{i,1} (x) ... (x) A_{i,N}``.

    Each factor is ``None`` (identity), a 1-D array (diagonal) or a square
    2-D array.
    """

    def __init__(self, terms: Sequence[Sequence], dims: Sequence[int] | None = None):
        if not terms:
            raise ValueError("operator needs at least one term")
        N = len(terms[0])
        if any(len(t) != N for t in terms):
            raise ValueError("every term needs one factor per mode")
        inferred = [None] * N
        clean = []
        for t in terms:
            row = []
            for n, f in enumerate(t):
                if f is not None:
                    f = np.asarray(f, dtype=np.float64)
                    if f.ndim == 2 and f.shape[0] != f.shape[1]:
                        raise ValueError(f"mode-{n} factor must be square, got {f.shape}")
                    if f.ndim not in (1, 2):
                        raise ValueError(f"mode-{n} factor must be 1-D or 2-D")
                    d = f.shape[0]
                    if inferred[n] is not None and inferred[n] != d:
                        raise ValueError(f"mode {n}: inconsistent sizes {inferred[n]} and {d}")
                    inferred[n] = d
                row.append(f)
            clean.append(row)
        if dims is not None:
            dims = [int(d) for d in dims]
            for n, (a, b) in enumerate(zip(inferred, dims)):
                if a is not None and a != b:
                    raise ValueError(f"mode {n}: factor size {a} disagrees with dims {b}")
        elif any(d is None for d in inferred):
            raise ValueError("dims required when a mode has only identity factors")
        else:
            dims = inferred
        self.terms = clean
        self.dims = tuple(dims)

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    def dense(self) -> np.ndarray:
        """Assembled matrix (oracle use only); row index follows C order of the tensor."""
        total = math.prod(self.dims)
        out = np.zeros((total, total))
        for t in self.terms:
            k = np.ones((1, 1))
            for f, d in zip(t, self.dims):
                k = np.kron(k, _factor_dense(f, d))
            out += k
        return out


def _apply_factor(core: np.ndarray, f) -> np.ndarray:
    if f is None:
        return core
    if f.ndim == 1:
        return core * f[None, :, None]
    return np.einsum("ij,ajb->aib", f, core, optimize=True)


def operator_terms(op: KroneckerSumOperator, x: TT) -> list[TT]:
    """The ``s`` rank-preserving products ``(A_{i,1} (x) ... (x) A_{i,N}) x``."""
    if tuple(x.dims) != op.dims:
        raise ValueError(f"operator dims {op.dims} do not match tensor dims {x.dims}")
    return [TT([_apply_factor(c, f) for c, f in zip(x.cores, t)], check=False) for t in op.terms]


def apply_operator(op: KroneckerSumOperator, x: TT) -> TT:
    """Unrounded image; internal ranks are ``s * R_n``."""
    return add_all(operator_terms(op, x))


class MeanPreconditioner:
    """``(sum_i A_{i,1})^{-1} (x) I (x) ... (x) I``, LU-factorized once."""

    def __init__(self, op: KroneckerSumOperator):
        d = op.dims[0]
        m = sum(_factor_dense(t[0], d) for t in op.terms)
        with warnings.catch_warnings():
            # singularity is reported below as LinAlgError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
        if np.min(np.abs(np.diag(lu))) <= np.finfo(float).eps * np.max(np.abs(np.diag(lu))) * d:
            raise np.linalg.LinAlgError("mean operator sum_i A_{i,1} is singular")
        self.factor = (lu, piv)
        self.matrix = m

    def __call__(self, v: TT) -> TT:
        c = v.cores[0]
        r0, m, r1 = c.shape
        sol = scipy.linalg.lu_solve(self.factor, c.transpose(1, 0, 2).reshape(m, r0 * r1))
        cores = list(v.cores)
        cores[0] = sol.reshape(m, r0, r1).transpose(1, 0, 2)
        return TT(cores, check=False)


def apply_preconditioner(op, v: TT, precond: MeanPreconditioner | None = None) -> TT:
    return (precond or MeanPreconditioner(op))(v)


@dataclass
class GmresConfig:
    """Solver settings.

    ``round_tol`` defaults to ``tol / 10`` and is applied after every TT
    addition.  The returned solution is rounded at ``final_tol`` (default
    ``round_tol / 10``).  For ``rounding="randomized"`` the sketch rank at
    each rounding starts from the ranks found at the previous call plus
    ``oversampling`` and grows on saturation, never past ``max_rank``.
    ``keep_basis`` stores the Krylov vectors in ``GmresTrace.basis``.
    """

    tol: float = 1e-8
    max_iter: int = 50
    rounding: str = "deterministic"
    round_tol: float | None = None
    final_tol: float | None = None
    seed: int = 0
    max_rank: int | None = None
    oversampling: int = 10
    keep_basis: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.rounding not in ("deterministic", "randomized"):
            raise ValueError(f"unknown rounding {self.rounding!r}")
        if self.round_tol is None:
            self.round_tol = self.tol / 10
        if self.final_tol is None:
            self.final_tol = self.round_tol / 10


@dataclass
class GmresTrace:
    residuals: list = field(default_factory=list)
    basis_ranks: list = field(default_factory=list)
    op_ranks: list = field(default_factory=list)
    time_op: list = field(default_factory=list)
    time_gs: list = field(default_factory=list)
    hessenberg: np.ndarray | None = None
    converged: bool = False
    breakdown: bool = False
    basis: list | None = None

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "breakdown": self.breakdown,
            "residuals": [float(r) for r in self.residuals],
            "basis_ranks": [list(r) for r in self.basis_ranks],
            "op_ranks": [list(r) for r in self.op_ranks],
            "time_op": self.time_op,
            "time_gs": self.time_gs,
        }


class _Rounder:
    def __init__(self, cfg: GmresConfig):
        self.cfg = cfg
        self.hints: dict[str, tuple] = {}
        self.calls = 0

    def __call__(self, terms: list[TT], coeffs: list[float], site: str, eps0: float) -> TT:
        if self.cfg.rounding == "deterministic":
            return tt_round(add_all(terms, coeffs), eps0)
        terms = [scale(t, a) if a != 1.0 else t for t, a in zip(terms, coeffs)]
        N = terms[0].order
        base = self.hints.get(site)
        if base is None:
            base = tuple(max(t.ranks[n] for t in terms) for n in range(1, N))
        guess = [b + self.cfg.oversampling for b in base]
        self.calls += 1
        out = round_sum_adaptive(terms, eps0, guess, seed=self.cfg.seed + 104729 * self.calls, max_rank=self.cfg.max_rank)
        self.hints[site] = out.internal_ranks
        return out


def tt_gmres(op: KroneckerSumOperator, f: TT, cfg: GmresConfig | None = None, precond: MeanPreconditioner | None = None):
    """Solve ``op x = f`` with right-preconditioned inexact GMRES on TT tensors.

    Every TT addition is followed by a rounding at ``cfg.round_tol``.
    Orthogonalization follows modified Gram-Schmidt ordering; the projections
    are formed from cached basis inner products, so ``Z = W - sum_j h_j V_j``
    is assembled once as a ``k + 1`` term sum and rounded once.

    Returns ``(x, trace)``.
    """
    cfg = cfg or GmresConfig()
    precond = precond or MeanPreconditioner(op)
    rounder = _Rounder(cfg)
    beta = norm(f)
    if beta == 0.0:
        raise ValueError("right-hand side is zero")

    trace = GmresTrace()
    basis = [scale(f, 1.0 / beta)]
    gram = [[inner(basis[0], basis[0])]]
    m = cfg.max_iter
    H = np.zeros((m + 1, m))
    cs, sn = np.zeros(m), np.zeros(m)
    tri = np.zeros((m, m))
    g = np.zeros(m + 1)
    g[0] = beta
    k_done = 0
    for k in range(m):
        t0 = time.perf_counter()
        y = precond(basis[k])
        w_terms = operator_terms(op, y)
        trace.op_ranks.append(tuple(sum(t.ranks[n] for t in w_terms) for n in range(1, f.order)))
        w = rounder(w_terms, [1.0] * len(w_terms), "op", cfg.round_tol)
        t1 = time.perf_counter()

        # modified Gram-Schmidt coefficients from <V_j, W> and the cached basis Gram matrix
        h = np.zeros(k + 1)
        for j in range(k + 1):
            h[j] = inner(basis[j], w) - sum(h[i] * gram[j][i] for i in range(j))
        z = rounder([w] + basis[: k + 1], [1.0] + list(-h), "gs", cfg.round_tol)
        hz = norm(z)
        t2 = time.perf_counter()

        H[: k + 1, k] = h
        H[k + 1, k] = hz
        col = H[: k + 2, k].copy()
        for i in range(k):
            a, b = col[i], col[i + 1]
            col[i], col[i + 1] = cs[i] * a + sn[i] * b, -sn[i] * a + cs[i] * b
        d = math.hypot(col[k], col[k + 1])
        cs[k], sn[k] = (1.0, 0.0) if d == 0.0 else (col[k] / d, col[k + 1] / d)
        col[k] = d
        tri[: k + 1, k] = col[: k + 1]
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]

        res = abs(g[k + 1]) / beta
        trace.residuals.append(res)
        trace.time_op.append(t1 - t0)
        trace.time_gs.append(t2 - t1)
        k_done = k + 1
        if res <= cfg.tol:
            trace.converged = True
            trace.basis_ranks.append(z.internal_ranks)
            break
        if hz <= 1e-14 * max(norm(w), 1e-300):
            trace.breakdown = True
            trace.basis_ranks.append(z.internal_ranks)
            break
        v = scale(z, 1.0 / hz)
        trace.basis_ranks.append(v.internal_ranks)
        gram.append([inner(v, b) for b in basis] + [inner(v, v)])
        for j, row in enumerate(gram[:-1]):
            row.append(gram[-1][j])
        basis.append(v)

    trace.hessenberg = H[: k_done + 1, :k_done]
    if cfg.keep_basis:
        trace.basis = list(basis)
    yv = scipy.linalg.solve_triangular(tri[:k_done, :k_done], g[:k_done])
    u = rounder(basis[:k_done], list(yv), "sol", cfg.final_tol)
    return precond(u), trace


def fd_laplacian(grid_points: int, edge_mask: np.ndarray | None = None) -> np.ndarray:
    """1-D Dirichlet finite-difference Laplacian on ``(0, 1)`` assembled edge by edge.

    The ``grid_points + 1`` edges include the two boundary edges.  With
    ``edge_mask`` only the selected edges contribute, which discretizes
    ``-(chi u')'`` for the indicator ``chi`` of the masked region.
    """
    g = grid_points
    inv_h2 = float(g + 1) ** 2
    if edge_mask is None:
        edge_mask = np.ones(g + 1, dtype=bool)
    a = np.zeros((g, g))
    for e in np.flatnonzero(edge_mask):
        left, right = e - 1, e
        if left >= 0:
            a[left, left] += inv_h2
        if right < g:
            a[right, right] += inv_h2
        if left >= 0 and right < g:
            a[left, right] -= inv_h2
            a[right, left] -= inv_h2
    return a


def build_cookie_surrogate(grid_points: int, num_params: int, samples_per_param: int, rho_range=(1.0, 10.0)):
    """Kronecker-sum surrogate of the parametric diffusion ("cookie") problem.

    Mode 1 is space (``grid_points`` unknowns), modes ``2..num_params+1`` are
    parameters with ``samples_per_param`` values spaced linearly over
    ``rho_range``.  The domain is cut into ``2 * num_params + 1`` equal
    segments; the odd segments are the inclusions.  Term ``i + 1`` couples
    the inclusion-``i`` Laplacian with ``diag(rho samples)`` in mode ``i + 1``.
    With ``num_params = 0`` a trailing mode of size 1 keeps the order at 2.

    Returns ``(operator, rhs)`` with an all-ones rank-1 right-hand side.
    """
    if grid_points < 4:
        raise ValueError("grid_points must be >= 4")
    if num_params < 0 or samples_per_param < 1:
        raise ValueError("num_params must be >= 0 and samples_per_param >= 1")
    base = fd_laplacian(grid_points)
    if num_params == 0:
        op = KroneckerSumOperator([[base, None]], dims=(grid_points, 1))
        return op, ones(op.dims)
    seg = grid_points // (2 * num_params + 1)
    if seg < 2:
        raise ValueError(f"{num_params} inclusions of >= 2 points do not fit in {grid_points} grid points")
    rho = np.linspace(rho_range[0], rho_range[1], samples_per_param)
    N = num_params + 1
    terms = [[base] + [None] * num_params]
    for i in range(num_params):
        lo = (2 * i + 1) * seg
        mask = np.zeros(grid_points + 1, dtype=bool)
        # interior edges of nodes lo .. lo + seg - 1
        mask[lo + 1:lo + seg] = True
        row = [fd_laplacian(grid_points, mask)] + [None] * num_params
        row[i + 1] = rho.copy()
        terms.append(row)
    dims = (grid_points,) + (samples_per_param,) * num_params
    op = KroneckerSumOperator(terms, dims=dims)
    assert op.order == N
    return op, ones(dims)


def operator_to_json(op: KroneckerSumOperator) -> str:
    terms = []
    for t in op.terms:
        row = []
        for f, d in zip(t, op.dims):
            if f is None:
                row.append({"identity": d})
            elif f.ndim == 1:
                row.append({"diag": f.tolist()})
            else:
                row.append({"dense": f.tolist()})
        terms.append(row)
    return json.dumps({"dims": list(op.dims), "terms": terms})


def operator_from_json(text: str) -> KroneckerSumOperator:
    doc = json.loads(text)
    terms = []
    for row in doc["terms"]:
        parsed = []
        for f in row:
            if len(f) != 1:
                raise ValueError(f"factor must have exactly one of dense/diag/identity: {list(f)}")
            (kind, val), = f.items()
            if kind == "identity":
                parsed.append(None)
            elif kind == "diag":
                parsed.append(np.asarray(val, dtype=np.float64))
            elif kind == "dense":
                parsed.append(np.asarray(val, dtype=np.float64).reshape(len(val), -1))
            else:
                raise ValueError(f"unknown factor kind {kind!r}")
        terms.append(parsed)
    dims = doc.get("dims")
    if dims is None:
        # every factor determines its mode size; the first term suffices
        dims = [f["identity"] if "identity" in f else len(next(iter(f.values()))) for f in doc["terms"][0]]
    return KroneckerSumOperator(terms, dims=dims)
