"""scikit-learn style front end: NaN entries are the unobserved ones."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError
from .measure import CompletionOperator
from .solver import SolverConfig, solve


class IRLSMCompleter(TransformerMixin, BaseEstimator):
    """Low-rank matrix completion by iteratively reweighted least squares.

    Parameters
    ----------
    rank : int
        Rank parameter ``K`` of the eps update; must be below ``min(n, p)``.
    gamma : float, default 1.0
    max_iter : int, default 200
    eps_stall_tol : float, default 1e-6
    eps_stall_len : int, default 50
    path : {"auto", "woodbury", "dense"}

    Attributes
    ----------
    completed_ : ndarray of shape (n, p)
        Completed matrix, which agrees with the observed entries.
    mask_ : ndarray of bool
        Observed pattern of the fitted matrix.
    report_ : SolverReport
    n_iter_ : int

    Examples
    --------
    >>> import numpy as np
    >>> X = np.outer(np.linspace(0.1, 1, 6), np.linspace(0.2, 1, 5))
    >>> X[[0, 3, 5], [1, 4, 2]] = np.nan
    >>> round(float(IRLSMCompleter(rank=1).fit_transform(X)[3, 4]), 6)
    0.64
    """

    def __init__(self, rank=1, gamma=1.0, max_iter=200, eps_stall_tol=1e-6, eps_stall_len=50, path="auto"):
        self.rank = rank
        self.gamma = gamma
        self.max_iter = max_iter
        self.eps_stall_tol = eps_stall_tol
        self.eps_stall_len = eps_stall_len
        self.path = path

    def _config(self):
        return SolverConfig(
            K=self.rank,
            gamma=self.gamma,
            max_iter=self.max_iter,
            eps_stall_tol=self.eps_stall_tol,
            eps_stall_len=self.eps_stall_len,
            path=self.path,
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
        mask = ~np.isnan(X)
        if not mask.any():
            raise InvalidInputError("X has no observed entries")
        if np.isinf(X[mask]).any():
            raise InvalidInputError("observed entries must be finite")
        self.mask_ = mask
        if mask.all():
            self.completed_ = X.copy()
            self.report_ = None
            self.n_iter_ = 0
            return self
        op = CompletionOperator.from_mask(mask)
        report = solve(op, op.apply(np.where(mask, X, 0.0)), self._config())
        self.completed_ = report.X_final
        self.report_ = report
        self.n_iter_ = report.iterations
        return self

    def transform(self, X):
        """Fill the NaN entries of ``X`` from the fitted completion."""
        check_is_fitted(self, "completed_")
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
        if X.shape != self.completed_.shape:
            raise InvalidInputError(f"expected shape {self.completed_.shape}, got {X.shape}")
        return np.where(np.isnan(X), self.completed_, X)
