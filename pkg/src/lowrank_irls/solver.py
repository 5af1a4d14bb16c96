"""Iteratively reweighted least squares for low-rank matrix recovery.

Each iteration solves a weighted least-squares problem under the exact
constraints ``S(X) = M``, lowers the regularization ``eps`` towards
``gamma * sigma_{K+1}(X)`` and rebuilds the weight from the left singular
vectors of ``X``. The weight is never formed densely; it is stored as

    W^{-1} = eps * I + U_r diag(sigma_r - eps) U_r^T,

where ``U_r`` holds the ``r`` left singular vectors whose singular values
exceed ``eps``.
"""

import dataclasses
import enum
import logging
import time
from typing import List, Optional

import numpy as np
import scipy.linalg

from . import matcore
from ._utils import as_matrix, as_vector, check_count, check_real
from .exceptions import (
    IllPosedError,
    InvalidArgumentError,
    NumericalFailureError,
)
from .measure import CompletionOperator, MeasurementOperator

logger = logging.getLogger(__name__)

#: sigma_{K+1} at or below this multiple of sigma_1 counts as an exact zero.
ZERO_RANK_TOL = 64 * np.finfo(float).eps
#: Feasibility slack enforced on every iterate.
FEASIBILITY_TOL = 1e-8


class StopReason(str, enum.Enum):
    EPS_ZERO = "eps_zero"
    MAX_ITER = "max_iter"
    EPS_STALLED = "eps_stalled"

    def __str__(self):
        return self.value


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Parameters of one solve.

    ``K`` is the rank handed to the algorithm (``sigma_{K+1}`` drives the
    eps update), ``gamma`` scales that update. The stall rule stops once the
    relative change of eps has stayed at or below ``eps_stall_tol`` for more
    than ``eps_stall_len`` consecutive iterations.
    """

    K: int
    gamma: float = 1.0
    max_iter: int = 200
    eps_stall_tol: float = 1e-6
    eps_stall_len: int = 50
    path: str = "auto"

    def validate(self, n, p):
        check_count(self.K, "K", low=1, high=min(n, p) - 1)
        check_real(self.gamma, "gamma", low=0.0, low_open=True)
        check_count(self.max_iter, "max_iter", low=1)
        check_real(self.eps_stall_tol, "eps_stall_tol", low=0.0)
        check_count(self.eps_stall_len, "eps_stall_len", low=0)
        if self.path not in ("auto", "dense", "woodbury"):
            raise InvalidArgumentError(f"unknown path {self.path!r}")
        return self


@dataclasses.dataclass(frozen=True)
class WeightFactors:
    """Factored weight ``W = eps^{-1} I + U diag(1/sigma - 1/eps) U^T``.

    ``U`` is ``n x r`` with orthonormal columns and every entry of ``sigma``
    exceeds ``eps``; ``r = 0`` gives the scaled identity ``eps^{-1} I``.
    """

    eps: float
    U: np.ndarray
    sigma: np.ndarray

    @classmethod
    def identity(cls, n):
        return cls(1.0, np.zeros((n, 0)), np.zeros(0))

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def r(self):
        return self.sigma.shape[0]

    def apply(self, X):
        """``W X``."""
        X = np.asarray(X, dtype=float)
        out = X / self.eps
        if self.r:
            out += self.U @ ((1.0 / self.sigma - 1.0 / self.eps)[:, None] * (self.U.T @ X))
        return out

    def inverse_apply(self, X):
        """``W^{-1} X``."""
        X = np.asarray(X, dtype=float)
        out = self.eps * X
        if self.r:
            out += self.U @ ((self.sigma - self.eps)[:, None] * (self.U.T @ X))
        return out

    def to_dense(self):
        return self.apply(np.eye(self.n))

    def inverse_to_dense(self):
        return self.inverse_apply(np.eye(self.n))

    def trace_inverse(self):
        """``Tr(W^{-1}) = ||W^{-1/2}||_F^2``."""
        return float(self.eps * (self.n - self.r) + np.sum(self.sigma))


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    iteration: int
    J: float
    eps: float
    r: int
    step_frobenius: float
    nuclear_norm: float
    trace_winv: float
    sigma_k_plus_1: float
    residual: float
    seconds: float


@dataclasses.dataclass
class SolverReport:
    """Outcome of :func:`solve`.

    ``trace[l-1]`` describes iterate ``X^l``. ``J_initial`` is
    ``J(X^1, I)``, the value before the first weight update, and bounds
    every later ``J`` from above. ``iterates`` is filled only when
    ``store_iterates=True``.
    """

    X_final: np.ndarray
    iterations: int
    stop_reason: StopReason
    trace: List[IterationRecord]
    config: SolverConfig
    J_initial: float
    gamma: float
    K: int
    path: str
    iterates: Optional[List[np.ndarray]] = None

    @property
    def final_eps(self):
        return self.trace[-1].eps

    def column(self, name):
        return np.array([getattr(rec, name) for rec in self.trace])


def _spd_solve(G, b):
    """Cholesky solve with one jittered retry; raises NumericalFailureError on a second failure."""
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(G, check_finite=False), b)
    except np.linalg.LinAlgError:
        pass
    dim = G.shape[0]
    jitter = 1e-12 * max(np.trace(G), np.finfo(float).tiny) / dim
    try:
        c = scipy.linalg.cho_factor(G + jitter * np.eye(dim), check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("SPD factorization failed after jitter retry") from exc
    logger.debug("SPD solve needed jitter %.3g", jitter)
    return scipy.linalg.cho_solve(c, b)


def weight_update(X, eps, factors=None):
    """Weight built from the left singular vectors of ``X`` stabilized at ``eps``.

    Keeps the singular values with ``sigma_j > eps * (1 + 1e-12)`` and
    ``sigma_j - eps >= 1e-12 * sigma_1``; the remainder are treated as equal
    to ``eps``, which keeps ``diag(sigma_j - eps)^{-1}`` finite in the
    Woodbury step. ``factors`` may carry a precomputed (possibly partial)
    SVD whose last singular value is ``<= eps``, or which is complete.
    """
    eps = check_real(eps, "eps", low=0.0, low_open=True)
    if factors is None:
        factors = matcore.svd(X)
    s = factors.sigma
    if s.size == 0:
        return WeightFactors(eps, np.zeros((factors.U.shape[0], 0)), np.zeros(0))
    keep = (s > eps * (1 + 1e-12)) & (s - eps >= 1e-12 * s[0])
    r = int(np.count_nonzero(keep))
    # sigma is sorted, so the kept set is a prefix
    return WeightFactors(eps, np.ascontiguousarray(factors.U[:, :r]), s[:r].copy())


def eps_update(eps_prev, gamma, sigma_k_plus_1):
    """``min(eps_prev, gamma * sigma_{K+1})``."""
    return min(float(eps_prev), float(gamma) * float(sigma_k_plus_1))


def stop_check(trace, cfg):
    """Stop reason for the run so far, or ``None`` to continue.

    ``trace`` is a sequence of records (or bare floats) holding the eps
    values ``eps_1, ..., eps_l``.
    """
    eps = [float(getattr(t, "eps", t)) for t in trace]
    if not eps:
        raise InvalidArgumentError("trace must be nonempty")
    if eps[-1] == 0.0:
        return StopReason.EPS_ZERO
    run = 0
    for prev, cur in zip(eps[-2::-1], eps[::-1]):
        if abs(cur - prev) <= cfg.eps_stall_tol * cur:
            run += 1
            if run > cfg.eps_stall_len:
                return StopReason.EPS_STALLED
        else:
            break
    if len(eps) >= cfg.max_iter:
        return StopReason.MAX_ITER
    return None


def x_update_dense(op, M, W):
    """Weighted least-squares update for a general operator.

    Builds ``G_ab = <S^*(e_a), W^{-1} S^*(e_b)>`` explicitly, solves
    ``G lam = M`` by Cholesky and returns ``X = W^{-1} S^*(lam)``, the
    minimizer of ``||W^{1/2} X||_F`` subject to ``S(X) = M``. Intended for
    small ``m``; costs ``O(m^2 n p)``.

    Raises
    ------
    IllPosedError
        If ``G`` cannot be factored (``S`` not surjective).
    """
    M = as_vector(M, "M", length=op.m)
    T = op.adjoint_basis()
    WT = W.inverse_apply(T.transpose(1, 0, 2).reshape(op.n, -1))
    WT = WT.reshape(op.n, op.m, op.p).transpose(1, 0, 2)
    G = T.reshape(op.m, -1) @ WT.reshape(op.m, -1).T
    G = 0.5 * (G + G.T)
    try:
        lam = _spd_solve(G, M)
    except NumericalFailureError as exc:
        raise IllPosedError("normal system S W^{-1} S^* is singular; operator not surjective?") from exc
    return np.tensordot(lam, WT, axes=1)


def x_update_completion(op, M, W):
    """Column-separable update for entry sampling using the Woodbury identity.

    For a column with observed rows ``o`` (``m_i = |o|``) and
    ``U_i = U[o]``, the inverse of ``S_i W^{-1} S_i^T = eps I + U_i D U_i^T``
    (``D = diag(sigma - eps)``) is applied through the ``r x r`` system
    ``(eps D^{-1} + U_i^T U_i) z = U_i^T M_i``. Substituting back gives the
    column ``U z`` with the observed rows replaced by ``M_i``, a form free of
    ``1/eps`` factors. When ``r > m_i`` the ``m_i x m_i`` system is the
    smaller one and is solved directly; it is also the fallback if the
    ``r x r`` factorization fails. Columns with no observations are zero.
    """
    M = as_vector(M, "M", length=op.m)
    n, p = op.n, op.p
    X = np.zeros((n, p))
    r, eps = W.r, W.eps
    if r == 0:
        X[op.rows, op.cols] = M
        return X
    U = W.U
    d = W.sigma - eps
    reg = eps / d
    for j in range(p):
        rows, sl = op.column(j)
        mi = rows.size
        if mi == 0:
            continue
        Mi = M[sl]
        Ui = U[rows]
        if r <= mi:
            A = Ui.T @ Ui
            A[np.diag_indices(r)] += reg
            try:
                z = _spd_solve(A, Ui.T @ Mi)
            except NumericalFailureError:
                logger.debug("r x r Woodbury solve failed in column %d; solving directly", j)
            else:
                col = U @ z
                col[rows] = Mi
                X[:, j] = col
                continue
        G = (Ui * d) @ Ui.T
        G[np.diag_indices(mi)] += eps
        lam = _spd_solve(G, Mi)
        col = U @ (d * (Ui.T @ lam))
        col[rows] += eps * lam
        X[:, j] = col
    return X


def _j_value(X, W):
    from .analysis import j_functional

    return j_functional(X, W)


def _solve_oriented(op, M, cfg, path, store_iterates, transposed):
    n, p = op.n, op.p
    K, gamma = cfg.K, cfg.gamma
    need = min(n, p)
    update = x_update_completion if path == "woodbury" else x_update_dense
    W = WeightFactors.identity(n)
    eps_prev = 1.0
    normM = float(np.linalg.norm(M))
    trace, iterates = [], [] if store_iterates else None
    X_prev = None
    J_initial = None
    stop = None
    start = time.perf_counter()
    while stop is None:
        ell = len(trace) + 1
        X = update(op, M, W)
        if not np.all(np.isfinite(X)):
            raise NumericalFailureError(f"non-finite iterate at iteration {ell}")
        residual = float(np.linalg.norm(op.apply(X) - M))
        if residual > FEASIBILITY_TOL * max(normM, np.finfo(float).tiny):
            raise IllPosedError(f"iterate {ell} violates the constraints (residual {residual:.3g})")
        if J_initial is None:
            J_initial = _j_value(X, W)

        if need <= matcore.FULL_SVD_LIMIT:
            # the dense SVD is computed anyway; keeping all of it gives the nuclear norm
            f = matcore.svd(X)
        else:
            count = min(need, max(K + 1, W.r) + 8)
            f = matcore.leading_svd(X, count)
            while f.sigma.size < need and f.sigma[-1] > min(eps_prev, gamma * f.sigma[K]):
                count = min(need, 2 * count)
                f = matcore.leading_svd(X, count)
        s = f.sigma
        s_next = float(s[K])
        if s_next <= ZERO_RANK_TOL * s[0]:
            s_next = 0.0
        eps = eps_update(eps_prev, gamma, s_next)
        if eps > 0:
            W = weight_update(X, eps, factors=f)
            J = _j_value(X, W)
            trace_winv = W.trace_inverse()
            r = W.r
        else:
            J = trace_winv = float(np.sum(s)) if s.size == need else float(np.sum(matcore.singular_values(X)))
            r = int(np.count_nonzero(s > ZERO_RANK_TOL * s[0]))
        step = float(np.linalg.norm(X - X_prev)) if X_prev is not None else float("nan")
        # a partial spectrum cannot give the nuclear norm; monitors skip NaN
        nuc = float(np.sum(s)) if s.size == need else float("nan")
        trace.append(
            IterationRecord(
                iteration=ell,
                J=J,
                eps=eps,
                r=r,
                step_frobenius=step,
                nuclear_norm=nuc,
                trace_winv=trace_winv,
                sigma_k_plus_1=float(s[K]),
                residual=residual,
                seconds=time.perf_counter() - start,
            )
        )
        if store_iterates:
            iterates.append(X.T.copy() if transposed else X.copy())
        stop = stop_check(trace, cfg)
        X_prev = X
        eps_prev = eps
    logger.info("solve stopped after %d iterations: %s (eps=%.3g)", len(trace), stop, trace[-1].eps)
    return X, trace, stop, J_initial, iterates


def solve(op, M, cfg, store_iterates=False):
    """Recover a low-rank matrix from linear measurements.

    Parameters
    ----------
    op : MeasurementOperator
        Surjective measurement operator.
    M : array_like, shape (m,)
        Measurements, in block order for a completion operator.
    cfg : SolverConfig
    store_iterates : bool
        Keep every iterate in ``report.iterates``.

    Returns
    -------
    SolverReport

    Notes
    -----
    Tall problems (``n > p``) are solved on the transposed operator, so the
    weight always acts on the smaller dimension; the returned matrices are
    transposed back.
    """
    if not isinstance(op, MeasurementOperator):
        raise InvalidArgumentError("op must be a MeasurementOperator")
    M = as_vector(M, "M", length=op.m)
    cfg.validate(op.n, op.p)
    path = cfg.path
    if path == "auto":
        path = "woodbury" if isinstance(op, CompletionOperator) else "dense"
    if path == "woodbury" and not isinstance(op, CompletionOperator):
        raise InvalidArgumentError("the woodbury path needs a CompletionOperator")
    transposed = op.n > op.p
    work_op, work_M = op, M
    if transposed:
        work_op, perm = op.transpose()
        work_M = M[perm]
    X, trace, stop, J0, iterates = _solve_oriented(work_op, work_M, cfg, path, store_iterates, transposed)
    if transposed:
        X = X.T
    return SolverReport(
        X_final=np.ascontiguousarray(X),
        iterations=len(trace),
        stop_reason=stop,
        trace=trace,
        config=cfg,
        J_initial=J0,
        gamma=cfg.gamma,
        K=cfg.K,
        path=path,
        iterates=iterates,
    )
