"""Spectral kernel: SVD, truncation, stabilization and unitarily invariant norms.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in C (row-major)
layout. Nothing here imposes ``n <= p``; for tall inputs the factors are the
thin ones, so ``U`` is ``n x min(n, p)`` and ``V`` is ``p x min(n, p)``.
"""

import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg

from ._utils import as_matrix, check_count, check_real, make_rng
from .exceptions import FormatError, InvalidArgumentError, InvalidInputError

logger = logging.getLogger(__name__)

#: Above this ``min(n, p)`` the solver switches to block power iteration.
FULL_SVD_LIMIT = 256


class SvdFactors(NamedTuple):
    """Thin singular value decomposition ``X = U diag(sigma) V^T``.

    ``sigma`` is nonincreasing and nonnegative. When produced by
    :func:`leading_svd` only the leading triplets are present.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    def recompose(self):
        return (self.U * self.sigma) @ self.V.T


def _fix_signs(U, V):
    # largest-magnitude entry of every left singular vector is made positive
    if U.shape[1] == 0:
        return U, V
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def svd(X):
    """Full thin SVD with a deterministic sign convention.

    Parameters
    ----------
    X : array_like, shape (n, p)
        Finite real matrix.

    Returns
    -------
    SvdFactors
        ``U`` (n x q), ``sigma`` (q,), ``V`` (p x q) with ``q = min(n, p)``.
        Each column of ``U`` has its largest-magnitude entry positive.

    Raises
    ------
    InvalidInputError
        If ``X`` is not a finite 2-D array.
    """
    X = as_matrix(X)
    try:
        U, s, Vt = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        U, s, Vt = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesvd")
    U, V = _fix_signs(U, Vt.T)
    return SvdFactors(np.ascontiguousarray(U), s, np.ascontiguousarray(V))


def singular_values(X):
    return scipy.linalg.svdvals(as_matrix(X))


def _block_power_svd(X, count, tol, max_iter, seed):
    n, p = X.shape
    block = min(count + 8, min(n, p))
    rng = make_rng(seed, 0)
    Q, _ = np.linalg.qr(X @ rng.standard_normal((p, block)))
    scale = None
    for it in range(max_iter):
        Z, _ = np.linalg.qr(X.T @ Q)
        Q, _ = np.linalg.qr(X @ Z)
        B = Q.T @ X
        Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
        U = Q @ Ub[:, :count]
        V = Vt[:count].T
        s = s[:count]
        if scale is None or s[0] > scale:
            scale = max(s[0], np.finfo(float).tiny)
        # X^T U - V S is zero by construction after Rayleigh-Ritz, so test X V - U S
        resid = np.linalg.norm(X @ V - U * s, axis=0)
        if np.all(resid <= tol * scale):
            return U, s, V, it + 1
    return None


def leading_svd(X, count, tol=1e-10, max_iter=500, seed=0):
    """Leading ``count`` singular triplets of ``X``.

    Uses a dense SVD when ``min(n, p) <= FULL_SVD_LIMIT`` or when ``count``
    covers more than half the spectrum. Otherwise runs block power (subspace)
    iteration with Rayleigh-Ritz extraction on a block of ``count + 8``
    vectors until every wanted triplet has residual
    ``||X v_j - sigma_j u_j|| <= tol * sigma_1``; if that does not happen
    within ``max_iter`` sweeps it falls back to the dense SVD.
    """
    X = as_matrix(X)
    q = min(X.shape)
    count = check_count(count, "count", low=1, high=q)
    if q <= FULL_SVD_LIMIT or 2 * count > q:
        f = svd(X)
        return SvdFactors(f.U[:, :count], f.sigma[:count], f.V[:, :count])
    out = _block_power_svd(X, count, tol, max_iter, seed)
    if out is None:
        logger.warning("block power iteration did not converge; using dense SVD")
        f = svd(X)
        return SvdFactors(f.U[:, :count], f.sigma[:count], f.V[:, :count])
    U, s, V, sweeps = out
    logger.debug("block power iteration converged in %d sweeps", sweeps)
    U, V = _fix_signs(U, V)
    return SvdFactors(np.ascontiguousarray(U), s, np.ascontiguousarray(V))


def truncate_k(factors, k):
    """k-spectral truncation: keep the ``k`` largest singular values, zero the rest."""
    q = factors.sigma.shape[0]
    k = check_count(k, "k", low=0, high=q)
    return (factors.U[:, :k] * factors.sigma[:k]) @ factors.V[:, :k].T


def eps_stabilize(sigma, eps):
    """Raise every singular value below ``eps`` to ``eps``.

    >>> eps_stabilize([3.0, 0.5], 1.0)
    array([3., 1.])
    """
    eps = check_real(eps, "eps", low=0.0)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise InvalidInputError("singular values must be nonnegative")
    if np.any(np.diff(sigma) > 0):
        raise InvalidInputError("singular values must be nonincreasing")
    return np.maximum(sigma, eps)


def schatten_norm(X, q):
    """Schatten q-norm, the l_q norm of the singular values (``q`` in [1, inf])."""
    q = float(q)
    if not q >= 1:
        raise InvalidArgumentError(f"Schatten norm needs q >= 1, got {q}")
    s = singular_values(X)
    if np.isinf(q):
        return float(s[0]) if s.size else 0.0
    if q == 1:
        return float(np.sum(s))
    if q == 2:
        return float(np.sqrt(np.sum(s * s)))
    return float(np.sum(s**q) ** (1.0 / q))


def nuclear_norm(X):
    return schatten_norm(X, 1)


def best_k_error(X, k):
    """Best rank-``k`` approximation error in the nuclear norm, ``sum_{i>k} sigma_i``."""
    s = singular_values(X)
    k = check_count(k, "k", low=0, high=s.shape[0])
    return float(np.sum(s[k:]))


def read_matrix(text):
    """Parse the fixture format: a ``rows cols`` line, then one line per row."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty matrix text")
    try:
        rows, cols = (int(t) for t in lines[0])
    except ValueError as exc:
        raise FormatError("first line must be 'rows cols'") from exc
    if rows < 1 or cols < 1:
        raise FormatError(f"bad dimensions {rows} x {cols}")
    body = lines[1:]
    if len(body) != rows or any(len(r) != cols for r in body):
        raise FormatError(f"expected {rows} rows of {cols} values")
    try:
        X = np.array([[float(t) for t in r] for r in body])
    except ValueError as exc:
        raise FormatError("matrix entries must be decimal reals") from exc
    return as_matrix(X)


def write_matrix(X):
    X = as_matrix(X)
    out = [f"{X.shape[0]} {X.shape[1]}"]
    out.extend(" ".join(repr(float(v)) for v in row) for row in X)
    return "\n".join(out) + "\n"
