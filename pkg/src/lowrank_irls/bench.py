"""Planted low-rank completion trials and their CSV report."""

import csv
import dataclasses
import io
import logging
import time

import numpy as np

from ._utils import as_matrix, as_vector, check_count, check_real, make_rng
from .exceptions import InvalidArgumentError, InvalidInputError, LowRankError
from .measure import sample_mask
from .solver import SolverConfig, solve

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "n", "p", "k", "kappa", "noise_sigma", "trial", "seed", "rel_error",
    "iterations", "seconds", "final_eps", "stop_reason", "status",
)

# stream keys under a trial seed
_FACTORS, _MASK, _NOISE = 0, 1, 2


def gen_lowrank(n, p, k, seed=0):
    """Random rank-``k`` matrix ``U diag(d) V^T``.

    ``U`` (n x k) and ``V`` (p x k) have i.i.d. standard normal entries, as
    does ``d``. The factors are not orthogonal, so this is not an SVD.
    """
    n = check_count(n, "n", low=1)
    p = check_count(p, "p", low=1)
    k = check_count(k, "k", low=0, high=min(n, p))
    rng = make_rng(seed, _FACTORS)
    U = rng.standard_normal((n, k))
    V = rng.standard_normal((p, k))
    d = rng.standard_normal(k)
    return (U * d) @ V.T


def add_noise(M, noise_sigma, seed=0):
    """``M + noise_sigma * g`` with ``g`` i.i.d. standard normal."""
    noise_sigma = check_real(noise_sigma, "noise_sigma", low=0.0)
    M = as_vector(M, "M")
    if noise_sigma == 0:
        return M.copy()
    return M + noise_sigma * make_rng(seed, _NOISE).standard_normal(M.shape[0])


def rel_error(Xhat, X):
    """``||X - Xhat||_F / ||X||_F``."""
    Xhat, X = as_matrix(Xhat, "Xhat"), as_matrix(X, "X")
    if Xhat.shape != X.shape:
        raise InvalidInputError(f"shape mismatch {Xhat.shape} vs {X.shape}")
    ref = np.linalg.norm(X)
    if ref == 0:
        raise InvalidArgumentError("reference matrix is zero")
    return float(np.linalg.norm(X - Xhat) / ref)


@dataclasses.dataclass(frozen=True)
class TrialSpec:
    n: int
    p: int
    k: int
    kappa: float
    noise_sigma: float = 0.0
    seed: int = 0
    config: SolverConfig = None

    def __post_init__(self):
        check_count(self.k, "k", low=1, high=min(self.n, self.p))
        if not 0 < self.kappa <= 1:
            raise InvalidArgumentError(f"kappa must lie in (0, 1], got {self.kappa}")
        if int(np.floor(self.kappa * self.n * self.p)) < 1:
            raise InvalidArgumentError("kappa*n*p must be at least 1")
        check_real(self.noise_sigma, "noise_sigma", low=0.0)
        if self.config is None:
            object.__setattr__(self, "config", SolverConfig(K=self.k))


def trial_seed(base_seed, trial):
    """Seed of trial ``trial``; shared across specs so grids use common random numbers."""
    return int(np.random.SeedSequence([int(base_seed), int(trial)]).generate_state(1)[0])


@dataclasses.dataclass
class TrialResult:
    spec: TrialSpec
    trial: int
    seed: int
    rel_error: float
    iterations: int
    seconds: float
    final_eps: float
    stop_reason: str
    status: str
    report: object = None


def run_trial(spec, trial, keep_report=False):
    """Generate, sample, optionally corrupt and solve one planted problem."""
    seed = trial_seed(spec.seed, trial)
    X = gen_lowrank(spec.n, spec.p, spec.k, seed)
    op = sample_mask(spec.n, spec.p, spec.kappa, seed)
    M = add_noise(op.apply(X), spec.noise_sigma, seed)
    start = time.perf_counter()
    try:
        report = solve(op, M, spec.config)
    except LowRankError as exc:
        logger.warning("trial %d of %s failed: %s", trial, spec, exc)
        return TrialResult(spec, trial, seed, float("nan"), 0, time.perf_counter() - start,
                           float("nan"), "", f"error: {type(exc).__name__}")
    seconds = time.perf_counter() - start
    return TrialResult(
        spec, trial, seed, rel_error(report.X_final, X), report.iterations, seconds,
        report.final_eps, str(report.stop_reason), "ok", report if keep_report else None,
    )


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return "nan" if np.isnan(x) else f"{x:.8g}"
    return str(x)


def _row(spec, trial, seed, err, iters, secs, eps, reason, status):
    return [spec.n, spec.p, spec.k, _fmt(spec.kappa), _fmt(spec.noise_sigma), trial, seed,
            _fmt(err), _fmt(iters), _fmt(round(secs, 3)), _fmt(eps), reason, status]


def run_grid(specs, trials_per_spec=10, keep_reports=False):
    """Run every spec ``trials_per_spec`` times.

    Returns ``(rows, results)``: CSV rows (header first) with one row per
    trial followed by one aggregate row per spec (``trial = "mean"``,
    averages over successful trials), and the raw :class:`TrialResult` list.
    A failing trial is recorded in its ``status`` column and the grid goes on.
    """
    specs = list(specs)
    if not specs:
        raise InvalidArgumentError("specs must be nonempty")
    trials_per_spec = check_count(trials_per_spec, "trials_per_spec", low=1)
    rows = [list(CSV_HEADER)]
    results = []
    for spec in specs:
        batch = [run_trial(spec, t, keep_reports) for t in range(trials_per_spec)]
        results.extend(batch)
        for r in batch:
            rows.append(_row(spec, r.trial, r.seed, r.rel_error, r.iterations, r.seconds,
                             r.final_eps, r.stop_reason, r.status))
        ok = [r for r in batch if r.status == "ok"]
        if ok:
            rows.append(_row(
                spec, "mean", "", float(np.mean([r.rel_error for r in ok])),
                float(np.mean([r.iterations for r in ok])),
                float(np.mean([r.seconds for r in ok])),
                float(np.mean([r.final_eps for r in ok])), "", f"aggregate {len(ok)}/{len(batch)}",
            ))
        else:
            rows.append(_row(spec, "mean", "", float("nan"), float("nan"), float("nan"),
                             float("nan"), "", f"aggregate 0/{len(batch)}"))
    return rows, results


def rows_to_csv(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()
