"""Variational functionals, invariant monitors and recovery-guarantee calculators."""

import dataclasses
import math
from typing import Optional

import numpy as np

from . import matcore
from ._utils import as_matrix, check_count, check_real, make_rng
from .exceptions import InvalidArgumentError, OutOfRegimeError
from .solver import weight_update


def j_functional(X, W):
    """``J(X, W) = (||W^{1/2} X||_F^2 + ||W^{-1/2}||_F^2) / 2`` for a factored ``W``.

    Uses ``||W^{1/2} X||^2 = sum_j ||u_j^T X||^2 / sigma_j + ||(I - U U^T) X||^2 / eps``
    and ``||W^{-1/2}||_F^2 = Tr(W^{-1})``. The projected residual is formed
    explicitly rather than as a difference of traces, which would cancel
    catastrophically once ``eps`` is small.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] != W.n:
        raise InvalidArgumentError(f"X has {X.shape[0]} rows but W is {W.n}x{W.n}")
    if W.r:
        C = W.U.T @ X
        low = float(np.sum(np.sum(C * C, axis=1) / W.sigma))
        rest = X - W.U @ C
    else:
        low, rest = 0.0, X
    quad = low + float(np.sum(rest * rest)) / W.eps
    return 0.5 * (quad + W.trace_inverse())


def j_functional_dense(X, W):
    """Same functional for an explicit symmetric positive definite ``W`` (test oracle)."""
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    lam, Q = np.linalg.eigh(W)
    if lam[0] <= 0:
        raise InvalidArgumentError("W must be positive definite")
    return 0.5 * (float(np.trace(X.T @ W @ X)) + float(np.sum(1.0 / lam)))


def _j_scalar(u, eps):
    u = np.abs(u)
    return np.where(u >= eps, u, (u * u + eps * eps) / (2 * eps))


def j_eps(X, eps):
    """Smoothed nuclear norm ``sum_i j_eps(sigma_i(X))``.

    ``j_eps(u) = |u|`` for ``|u| >= eps`` and ``(u^2 + eps^2) / (2 eps)`` below.
    Sums over ``min(n, p)`` singular values.
    """
    eps = check_real(eps, "eps", low=0.0, low_open=True)
    return float(np.sum(_j_scalar(matcore.singular_values(X), eps)))


def grad_j_eps(X, eps):
    """Gradient ``U diag(j'_eps(sigma)) V^T`` with ``j'(u) = 1`` above ``eps`` and ``u/eps`` below."""
    eps = check_real(eps, "eps", low=0.0, low_open=True)
    f = matcore.svd(X)
    d = np.where(f.sigma >= eps, 1.0, f.sigma / eps)
    return (f.U * d) @ f.V.T


@dataclasses.dataclass
class PropertyCheck:
    name: str
    passed: bool
    worst: float
    index: Optional[int] = None


@dataclasses.dataclass
class MonotonicityDiagnostics:
    """Outcome of :func:`check_monotonicity`; ``A`` is the trace-computed constant."""

    decreasing: PropertyCheck
    above_nuclear: PropertyCheck
    summable_steps: PropertyCheck
    A: float

    @property
    def passed(self):
        return self.decreasing.passed and self.above_nuclear.passed and self.summable_steps.passed

    def __iter__(self):
        return iter((self.decreasing, self.above_nuclear, self.summable_steps))


def check_monotonicity(report, rel_slack=1e-10, nuclear_slack=1e-9):
    """Check the three basic properties of the iterates on a solver trace.

    1. ``J(X^{l+1}, W^{l+1}) <= J(X^l, W^l) * (1 + rel_slack)``.
    2. ``J(X^l, W^l) >= ||X^l||_* - nuclear_slack * J``.
    3. ``sum_{l>=1} ||X^{l+1} - X^l||_F^2 <= 2 A J(X^1, I)`` with
       ``A = max_l Tr((W^l)^{-1})``.

    ``worst`` holds the largest violation margin for each property (negative
    means satisfied with room); ``index`` is the 1-based iteration where it
    occurred. Fewer than two iterations pass vacuously.
    """
    J = report.column("J")
    nuc = report.column("nuclear_norm")
    steps = report.column("step_frobenius")
    A = float(np.max(report.column("trace_winv")))

    if J.size < 2:
        vacuous = PropertyCheck("J nonincreasing", True, -np.inf)
        return MonotonicityDiagnostics(
            vacuous,
            PropertyCheck("J >= nuclear norm", True, -np.inf),
            PropertyCheck("summable steps", True, -np.inf),
            A,
        )

    inc = J[1:] - J[:-1] * (1 + rel_slack)
    i = int(np.argmax(inc))
    decreasing = PropertyCheck("J nonincreasing", bool(inc[i] <= 0), float(inc[i]), i + 2)

    gap = nuc - J - nuclear_slack * np.abs(J)
    valid = np.isfinite(gap)
    if valid.any():
        j = int(np.nanargmax(np.where(valid, gap, -np.inf)))
        above = PropertyCheck("J >= nuclear norm", bool(gap[j] <= 0), float(gap[j]), j + 1)
    else:
        above = PropertyCheck("J >= nuclear norm", True, -np.inf)

    partial = np.cumsum(np.nan_to_num(steps[1:], nan=0.0) ** 2)
    bound = 2.0 * A * report.J_initial
    excess = partial - bound * (1 + rel_slack)
    k = int(np.argmax(excess))
    summable = PropertyCheck("summable steps", bool(excess[k] <= 0), float(excess[k]), k + 2)
    return MonotonicityDiagnostics(decreasing, above, summable, A)


def optimality_residual(X, W, op, trials=10, seed=0):
    """Largest normalized ``|<W X, H>|`` over random kernel directions ``H``.

    Vanishes exactly when ``X`` minimizes ``||W^{1/2} X||_F`` on its affine
    constraint set.
    """
    trials = check_count(trials, "trials", low=1)
    WX = W.apply(X)
    nWX = np.linalg.norm(WX)
    worst = 0.0
    for t in range(trials):
        H = op.kernel_sample(seed=make_rng(seed, t).integers(2**31))
        denom = nWX * np.linalg.norm(H)
        if denom == 0:
            continue
        worst = max(worst, abs(float(np.sum(WX * H))) / denom)
    return worst


@dataclasses.dataclass
class WeightCheck:
    passed: bool
    J_opt: float
    J_best_trial: float
    worst_gap: float


def random_admissible_weight(n, eps, rng):
    """Random ``Q diag(d) Q^T`` with ``d`` log-uniform in ``[1e-3/eps, 1/eps]``."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    d = np.exp(rng.uniform(np.log(1e-3 / eps), np.log(1.0 / eps), size=n))
    return (Q * d) @ Q.T


def weight_optimality_check(X, eps, trials=100, seed=0, extra=()):
    """Compare ``J(X, W_bar)`` against random weights with ``0 < W <= I/eps``.

    ``W_bar`` is the weight produced by :func:`weight_update`. ``extra`` may
    add explicit candidate weights (dense arrays) to the random ones.
    """
    X = as_matrix(X)
    eps = check_real(eps, "eps", low=0.0, low_open=True)
    trials = check_count(trials, "trials", low=0)
    J_opt = j_functional(X, weight_update(X, eps))
    rng = make_rng(seed, 3)
    candidates = [random_admissible_weight(X.shape[0], eps, rng) for _ in range(trials)]
    candidates.extend(np.asarray(w, dtype=float) for w in extra)
    values = [j_functional_dense(X, w) for w in candidates]
    best = min(values) if values else np.inf
    gap = J_opt - best
    return WeightCheck(bool(gap <= 1e-10), J_opt, best, float(gap))


def random_rank_k(n, p, k, rng):
    """``A B^T`` with standard normal factors, scaled to unit Frobenius norm."""
    X = rng.standard_normal((n, k)) @ rng.standard_normal((p, k)).T
    return X / np.linalg.norm(X)


def rip_estimate(op, k, trials=100, seed=0, directions=()):
    """Monte-Carlo lower bound on the restricted isometry constant of order ``k``.

    Returns ``max |‖S(X)‖^2 - 1|`` over ``trials`` random unit-Frobenius
    rank-``k`` matrices plus any explicit ``directions`` (normalized here).
    The true constant is a supremum over all rank-``k`` matrices, so this is
    only ever a lower bound. Trial ``t`` uses its own stream, so the
    estimate is nondecreasing in ``trials`` for a fixed seed.
    """
    k = check_count(k, "k", low=1, high=min(op.n, op.p))
    trials = check_count(trials, "trials", low=0)
    worst = 0.0
    for t in range(trials):
        X = random_rank_k(op.n, op.p, k, make_rng(seed, 5, t))
        y = op.apply(X)
        worst = max(worst, abs(float(y @ y) - 1.0))
    for D in directions:
        D = as_matrix(D, "direction")
        D = D / np.linalg.norm(D)
        y = op.apply(D)
        worst = max(worst, abs(float(y @ y) - 1.0))
    return worst


def eta_from_rip(delta_3k, delta_4k):
    """Null-space constant ``sqrt(2) * delta_4k / (1 - delta_3k)`` implied by the RIP."""
    d3 = check_real(delta_3k, "delta_3k", low=0.0)
    d4 = check_real(delta_4k, "delta_4k", low=0.0)
    if not d4 < 1 or not d3 < 1:
        raise InvalidArgumentError("RIP constants must be < 1")
    if d3 > d4:
        raise InvalidArgumentError("delta_3k cannot exceed delta_4k")
    return math.sqrt(2.0) * d4 / (1.0 - d3)


def lambda_bound(eta, K, k):
    """Error constant ``Lambda`` bounding ``||X - X_bar||_*`` by ``Lambda * rho_k(X)_*``.

    Requires ``0 <= eta < 1`` and ``k < K - 2 eta / (1 - eta)``.
    """
    eta = check_real(eta, "eta", low=0.0)
    K = check_count(K, "K", low=1)
    k = check_count(k, "k", low=0)
    if not eta < 1:
        raise OutOfRegimeError(f"eta={eta} must be < 1")
    if not k < K - 2 * eta / (1 - eta):
        raise OutOfRegimeError(f"k={k} must be < K - 2 eta/(1-eta) = {K - 2 * eta / (1 - eta):.6g}")
    one_p, one_m = 1.0 + eta, 1.0 - eta
    return 4 * one_p**2 / (one_m**2 * ((K - k) * one_m - 2 * eta)) + 2 * one_p / one_m


@dataclasses.dataclass(frozen=True)
class GuaranteeInputs:
    delta_3k: float
    delta_4k: float
    K: int
    k: int

    def __post_init__(self):
        if not self.k < self.K:
            raise InvalidArgumentError("k must be smaller than K")
        eta_from_rip(self.delta_3k, self.delta_4k)


@dataclasses.dataclass
class GuaranteeReport:
    eta: float
    eta_threshold: Optional[float]
    convergence_condition: Optional[bool]
    Lambda: Optional[float]
    note: str = ""


def guarantee_report(inputs):
    """Evaluate ``eta``, the convergence condition ``eta < 1 - 2/(K-2)`` and ``Lambda``."""
    eta = eta_from_rip(inputs.delta_3k, inputs.delta_4k)
    threshold = 1 - 2 / (inputs.K - 2) if inputs.K > 2 else None
    cond = (eta < threshold) if threshold is not None else None
    note = ""
    try:
        lam = lambda_bound(eta, inputs.K, inputs.k)
    except OutOfRegimeError as exc:
        lam, note = None, str(exc)
    return GuaranteeReport(eta, threshold, cond, lam, note)


def weight_matrix_oracle(X, eps):
    """Dense ``[((X X^T)^{1/2})_eps]^{-1}`` from a full symmetric eigendecomposition."""
    X = as_matrix(X)
    lam, Q = np.linalg.eigh(X @ X.T)
    root = np.sqrt(np.clip(lam, 0, None))
    return (Q / np.maximum(root, eps)) @ Q.T



def weyl_gap(X, Y):
    """``max_i |sigma_i(X) - sigma_i(Y)| - ||X - Y||_F``; nonpositive by Weyl's inequality."""
    X, Y = as_matrix(X, "X"), as_matrix(Y, "Y")
    sx, sy = matcore.singular_values(X), matcore.singular_values(Y)
    return float(np.max(np.abs(sx - sy)) - np.linalg.norm(X - Y))


def rearrangement_gap(X, Y, J, j):
    """``(J - j) sigma_J(X) - ||X - Y||_* - ||Y - Y_[j]||_*`` for ``1 <= j < J``; nonpositive."""
    X, Y = as_matrix(X, "X"), as_matrix(Y, "Y")
    J = check_count(J, "J", low=1, high=min(X.shape))
    j = check_count(j, "j", low=0, high=J - 1)
    sx = matcore.singular_values(X)
    tail = float(np.sum(matcore.singular_values(Y)[j:]))
    return float((J - j) * sx[J - 1] - matcore.nuclear_norm(X - Y) - tail)


def orthogonal_pair(n, p, rx, rz, rng):
    """Random ``X, Z`` with ``X Z^T = 0`` and ``X^T Z = 0`` built from disjoint singular subspaces."""
    if rx + rz > min(n, p):
        raise InvalidArgumentError("rx + rz must not exceed min(n, p)")
    U = np.linalg.qr(rng.standard_normal((n, rx + rz)))[0]
    V = np.linalg.qr(rng.standard_normal((p, rx + rz)))[0]
    s = rng.uniform(0.1, 10.0, size=rx + rz)
    X = (U[:, :rx] * s[:rx]) @ V[:, :rx].T
    Z = (U[:, rx:] * s[rx:]) @ V[:, rx:].T
    return X, Z


def additivity_gap(X, Z):
    """Relative ``| ||X+Z||_* - ||X||_* - ||Z||_* |``."""
    a = matcore.nuclear_norm(X + Z)
    b = matcore.nuclear_norm(X) + matcore.nuclear_norm(Z)
    return abs(a - b) / max(b, np.finfo(float).tiny)


def kkt_solve(op, M, W):
    """Weighted least-squares minimizer from the full saddle-point system.

    Solves ``[[W (x) I_p, A^T], [A, 0]] [x; mu] = [0; M]`` with ``A`` the
    coefficient array of ``op`` and ``W`` a dense SPD matrix. This is an
    independent check on the closed-form updates and costs ``O((np + m)^3)``.
    """
    W = np.asarray(W, dtype=float)
    A = op.coefficients()
    H = np.kron(W, np.eye(op.p))
    N = op.n * op.p
    K = np.zeros((N + op.m, N + op.m))
    K[:N, :N] = H
    K[:N, N:] = A.T
    K[N:, :N] = A
    rhs = np.concatenate([np.zeros(N), np.asarray(M, dtype=float)])
    return np.linalg.solve(K, rhs)[:N].reshape(op.n, op.p)
