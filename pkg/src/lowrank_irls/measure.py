"""Linear measurement operators ``S: R^{n x p} -> R^m`` and their adjoints.

Two families are provided. :class:`DenseOperator` stores an explicit
``m x (n*p)`` coefficient array acting on the row-major vectorization
``X.ravel()``. :class:`CompletionOperator` samples entries and is separable
by column: its output is the concatenation of per-column blocks
``M_1, ..., M_p``, each listing the observed entries of that column in
increasing row order.
"""

import numpy as np
import scipy.linalg

from ._utils import as_matrix, as_vector, check_count, make_rng
from .exceptions import FormatError, InvalidArgumentError, InvalidInputError, NoKernelError


class MeasurementOperator:
    """Common interface; subclasses implement ``apply`` and ``adjoint``."""

    n: int
    p: int
    m: int

    @property
    def shape(self):
        return (self.n, self.p)

    def _check_X(self, X):
        X = as_matrix(X)
        if X.shape != (self.n, self.p):
            raise InvalidInputError(f"expected a {self.n}x{self.p} matrix, got {X.shape}")
        return X

    def _check_lam(self, lam):
        return as_vector(lam, "measurement vector", length=self.m)

    def adjoint_basis(self):
        """Stack of ``S^*(e_a)`` for ``a = 0..m-1`` as an ``(m, n, p)`` array."""
        return self.coefficients().reshape(self.m, self.n, self.p)

    def coefficients(self):
        raise NotImplementedError

    def gram(self):
        """``S S^*`` as an ``m x m`` matrix."""
        A = self.coefficients()
        return A @ A.T

    def kernel_sample(self, seed=0):
        """Random nonzero ``H`` with ``S(H) = 0``.

        A standard normal ``Z`` is projected onto the kernel,
        ``H = Z - S^*((S S^*)^{-1} S(Z))``.
        """
        if self.m >= self.n * self.p:
            raise NoKernelError("operator has m = n*p measurements; kernel is trivial")
        Z = make_rng(seed, 7).standard_normal((self.n, self.p))
        c = scipy.linalg.cho_factor(self.gram())
        H = Z - self.adjoint(scipy.linalg.cho_solve(c, self.apply(Z)))
        # one refinement sweep keeps ||S(H)|| at roundoff level
        H -= self.adjoint(scipy.linalg.cho_solve(c, self.apply(H)))
        return H


class DenseOperator(MeasurementOperator):
    """General operator given by an ``m x (n*p)`` coefficient array.

    Row ``a`` of ``A`` is the row-major vectorization of the matrix
    ``S^*(e_a)``, so ``S(X)_a = <S^*(e_a), X>``.
    """

    def __init__(self, A, n, p):
        A = as_matrix(A, "A")
        n = check_count(n, "n", low=1)
        p = check_count(p, "p", low=1)
        if A.shape[1] != n * p:
            raise InvalidInputError(f"A has {A.shape[1]} columns, expected n*p={n * p}")
        self.A = A
        self.A.setflags(write=False)
        self.n, self.p, self.m = n, p, A.shape[0]

    def __repr__(self):
        return f"DenseOperator(n={self.n}, p={self.p}, m={self.m})"

    def apply(self, X):
        return self.A @ self._check_X(X).ravel()

    def adjoint(self, lam):
        return (self._check_lam(lam) @ self.A).reshape(self.n, self.p)

    def coefficients(self):
        return self.A

    def transpose(self):
        """Operator acting on ``X^T`` with the same output: ``(op_T, perm)``, ``perm`` the identity."""
        At = self.A.reshape(self.m, self.n, self.p).transpose(0, 2, 1).reshape(self.m, -1)
        return DenseOperator(At, self.p, self.n), np.arange(self.m)


class CompletionOperator(MeasurementOperator):
    """Entry-sampling operator, ``S(X)_l = X[i_l, j_l]``.

    Observed positions are stored column by column in CSC fashion:
    ``rows[indptr[j]:indptr[j+1]]`` holds the sorted observed rows of
    column ``j``. Columns without observations are allowed.
    """

    def __init__(self, n, p, rows, cols):
        n = check_count(n, "n", low=1)
        p = check_count(p, "p", low=1)
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        if rows.shape != cols.shape:
            raise InvalidArgumentError("rows and cols must have equal length")
        if rows.size == 0:
            raise InvalidArgumentError("at least one entry must be observed")
        if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= p:
            raise InvalidArgumentError("observed index out of range")
        order = np.lexsort((rows, cols))
        rows, cols = rows[order], cols[order]
        flat = cols * n + rows
        if np.any(np.diff(flat) == 0):
            raise InvalidArgumentError("duplicate observed index")
        self.n, self.p, self.m = n, p, rows.size
        self.rows, self.cols = rows, cols
        self.indptr = np.searchsorted(cols, np.arange(p + 1))
        self.input_order = order
        for a in (self.rows, self.cols, self.indptr, self.input_order):
            a.setflags(write=False)

    def __repr__(self):
        return f"CompletionOperator(n={self.n}, p={self.p}, m={self.m})"

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise InvalidInputError("mask must be 2-D")
        rows, cols = np.nonzero(mask)
        return cls(mask.shape[0], mask.shape[1], rows, cols)

    def column(self, j):
        """Observed rows of column ``j`` and the slice of the measurement vector they occupy."""
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.rows[lo:hi], slice(lo, hi)

    @property
    def counts(self):
        return np.diff(self.indptr)

    def mask(self):
        out = np.zeros((self.n, self.p), dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def apply(self, X):
        return self._check_X(X)[self.rows, self.cols]

    def adjoint(self, lam):
        out = np.zeros((self.n, self.p))
        out[self.rows, self.cols] = self._check_lam(lam)
        return out

    def coefficients(self):
        A = np.zeros((self.m, self.n * self.p))
        A[np.arange(self.m), self.rows * self.p + self.cols] = 1.0
        return A

    def adjoint_basis(self):
        out = np.zeros((self.m, self.n, self.p))
        out[np.arange(self.m), self.rows, self.cols] = 1.0
        return out

    def gram(self):
        return np.eye(self.m)

    def kernel_sample(self, seed=0):
        if self.m >= self.n * self.p:
            raise NoKernelError("every entry is observed; kernel is trivial")
        H = make_rng(seed, 7).standard_normal((self.n, self.p))
        H[self.rows, self.cols] = 0.0
        return H

    def transpose(self):
        """Operator on ``X^T`` plus the permutation ``perm`` with ``op_T.apply(X.T) == op.apply(X)[perm]``."""
        op_t = CompletionOperator(self.p, self.n, self.cols, self.rows)
        return op_t, np.asarray(op_t.input_order)

    def to_dense(self):
        return DenseOperator(self.coefficients(), self.n, self.p)

    def block_order(self, values):
        """Reorder values given in construction order into block (column-major) order."""
        values = as_vector(values, "values", length=self.m)
        return values[self.input_order]


def gaussian_op(n, p, m, seed=0):
    """Dense operator with i.i.d. ``N(0, 1/m)`` coefficients (stream key 11)."""
    n = check_count(n, "n", low=1)
    p = check_count(p, "p", low=1)
    m = check_count(m, "m", low=1, high=n * p)
    A = make_rng(seed, 11).standard_normal((m, n * p)) / np.sqrt(m)
    return DenseOperator(A, n, p)


def completion_op(n, p, observed_indices):
    """Completion operator from an iterable of ``(row, col)`` pairs."""
    idx = np.asarray(list(observed_indices), dtype=np.int64)
    if idx.size == 0:
        raise InvalidArgumentError("at least one entry must be observed")
    if idx.ndim != 2 or idx.shape[1] != 2:
        raise InvalidArgumentError("observed_indices must be (row, col) pairs")
    return CompletionOperator(n, p, idx[:, 0], idx[:, 1])


def sample_mask(n, p, fraction, seed=0):
    """Exactly ``floor(fraction*n*p)`` entries drawn uniformly without replacement (stream key 1)."""
    n = check_count(n, "n", low=1)
    p = check_count(p, "p", low=1)
    fraction = float(fraction)
    if not 0 < fraction <= 1:
        raise InvalidArgumentError(f"fraction must lie in (0, 1], got {fraction}")
    m = int(np.floor(fraction * n * p))
    if m < 1:
        raise InvalidArgumentError("fraction too small: no entries would be observed")
    flat = make_rng(seed, 1).choice(n * p, size=m, replace=False)
    return CompletionOperator(n, p, flat // p, flat % p)


def read_mask(text):
    """Parse a mask file: header ``n p``, then one 0-based ``row col`` pair per line.

    Returns ``(op, order)`` where ``order`` maps block order back to file
    lines, i.e. ``op.apply(X) == values_in_file_order[order]``.
    """
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty mask file")
    try:
        n, p = (int(t) for t in lines[0])
        pairs = [(int(a), int(b)) for a, b in lines[1:]]
    except ValueError as exc:
        raise FormatError("mask file lines must hold two integers") from exc
    if not pairs:
        raise FormatError("mask file lists no observed entries")
    try:
        op = completion_op(n, p, pairs)
    except InvalidArgumentError as exc:
        raise FormatError(str(exc)) from exc
    return op, np.asarray(op.input_order)


def write_mask(op):
    out = [f"{op.n} {op.p}"]
    out.extend(f"{i} {j}" for i, j in zip(op.rows.tolist(), op.cols.tolist()))
    return "\n".join(out) + "\n"
