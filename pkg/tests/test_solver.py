import numpy as np
import pytest

from lowrank_irls import analysis, bench, matcore, measure
from lowrank_irls.exceptions import IllPosedError, InvalidArgumentError, InvalidInputError
from lowrank_irls.solver import (
    SolverConfig,
    StopReason,
    WeightFactors,
    eps_update,
    solve,
    stop_check,
    weight_update,
    x_update_completion,
    x_update_dense,
)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def random_weight(n, r, rng, eps=0.2):
    U = np.linalg.qr(rng.standard_normal((n, r)))[0]
    sigma = np.sort(rng.uniform(eps * 1.5, 5.0, size=r))[::-1]
    return WeightFactors(eps, U, sigma)


def reference_irls(op, M, K, gamma, iters):
    """Textbook loop: dense eigendecomposition weights, saddle-point least squares."""
    W = np.eye(op.n)
    eps = 1.0
    out = []
    for _ in range(iters):
        X = analysis.kkt_solve(op, M, W)
        out.append(X)
        eps = min(eps, gamma * np.linalg.svd(X, compute_uv=False)[K])
        W = analysis.weight_matrix_oracle(X, eps)
    return out


class TestWeightUpdate:
    def test_example(self):
        W = weight_update(np.diag([3.0, 0.5, 0.2]), 1.0)
        assert W.r == 1
        assert np.allclose(np.linalg.eigvalsh(W.to_dense()), [1 / 3, 1, 1])

    def test_zero_matrix(self):
        W = weight_update(np.zeros((4, 3)), 0.5)
        assert W.r == 0
        assert np.array_equal(W.to_dense(), 2.0 * np.eye(4))

    def test_dense_oracle(self, rng):
        X = rng.standard_normal((8, 6))
        W = weight_update(X, 0.3)
        assert np.allclose(W.to_dense(), analysis.weight_matrix_oracle(X, 0.3), atol=1e-9)

    def test_inverse_and_trace(self, rng):
        W = weight_update(rng.standard_normal((6, 6)), 0.7)
        assert np.allclose(W.to_dense() @ W.inverse_to_dense(), np.eye(6), atol=1e-12)
        assert W.trace_inverse() == pytest.approx(np.trace(W.inverse_to_dense()))

    def test_near_eps_values_excluded(self):
        W = weight_update(np.diag([2.0, 1.0 + 1e-14, 0.1]), 1.0)
        assert W.r == 1


class TestEpsAndStop:
    @pytest.mark.parametrize("args, expected", [((1, 1, 0.5), 0.5), ((1, 1, 2), 1), ((0.3, 1, 0), 0)])
    def test_eps_update(self, args, expected):
        assert eps_update(*args) == expected

    def test_stop_eps_zero(self):
        assert stop_check([1.0, 0.0], SolverConfig(K=1)) == StopReason.EPS_ZERO

    def test_stop_stalled(self):
        cfg = SolverConfig(K=1)
        assert stop_check([0.5] * 52, cfg) == StopReason.EPS_STALLED
        assert stop_check([0.5] * 51, cfg) is None

    def test_stall_needs_consecutive_run(self):
        trace = [0.5] * 40 + [0.25] * 40
        assert stop_check(trace, SolverConfig(K=1)) is None

    def test_decreasing_not_stopped(self):
        assert stop_check([0.5**i for i in range(10)], SolverConfig(K=1)) is None

    def test_max_iter(self):
        assert stop_check([0.5**i for i in range(5)], SolverConfig(K=1, max_iter=5)) == StopReason.MAX_ITER

    def test_empty_trace(self):
        with pytest.raises(InvalidArgumentError):
            stop_check([], SolverConfig(K=1))


class TestXUpdate:
    def test_identity_weight_completion_dense(self):
        op = measure.sample_mask(5, 4, 0.5, seed=1)
        M = np.arange(1.0, op.m + 1)
        X = x_update_dense(op, M, WeightFactors.identity(5))
        assert np.allclose(X, op.adjoint(M), atol=1e-12)

    def test_feasible_any_weight(self, rng):
        op = measure.gaussian_op(6, 5, 12, seed=2)
        M = rng.standard_normal(12)
        for r in (0, 2, 5):
            X = x_update_dense(op, M, random_weight(6, r, rng))
            assert np.linalg.norm(op.apply(X) - M) <= 1e-10 * np.linalg.norm(M)

    def test_kkt_oracle(self, rng):
        op = measure.gaussian_op(6, 5, 12, seed=4)
        M = rng.standard_normal(12)
        W = random_weight(6, 3, rng)
        assert rel(x_update_dense(op, M, W), analysis.kkt_solve(op, M, W.to_dense())) <= 1e-8

    def test_not_surjective(self, rng):
        A = rng.standard_normal((3, 6))
        op = measure.DenseOperator(np.vstack([A, A[0]]), 2, 3)
        with pytest.raises(IllPosedError):
            solve(op, np.array([1.0, 1.0, 1.0, 2.0]), SolverConfig(K=1))

    def test_completion_r0(self):
        op = measure.sample_mask(5, 5, 0.4, seed=0)
        M = np.arange(op.m, dtype=float) + 1
        X = x_update_completion(op, M, WeightFactors(0.3, np.zeros((5, 0)), np.zeros(0)))
        assert np.array_equal(X, op.adjoint(M))

    def test_completion_matches_dense(self, rng):
        op = measure.sample_mask(20, 20, 0.4, seed=3)
        M = rng.standard_normal(op.m)
        W = random_weight(20, 3, rng)
        assert rel(x_update_completion(op, M, W), x_update_dense(op, M, W)) <= 1e-8

    def test_completion_wide_weight_and_empty_columns(self, rng):
        # r exceeds every m_i, so each column takes the direct branch
        op = measure.completion_op(8, 5, [(0, 0), (3, 0), (5, 1), (1, 3), (2, 3), (7, 3)])
        M = rng.standard_normal(op.m)
        W = random_weight(8, 6, rng, eps=1e-3)
        X = x_update_completion(op, M, W)
        assert rel(X, x_update_dense(op, M, W)) <= 1e-8
        assert not np.any(X[:, [2, 4]])

    def test_completion_tiny_eps_against_extended_precision(self, rng):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 50
        op = measure.sample_mask(8, 8, 0.5, seed=5)
        M = rng.standard_normal(op.m)
        W = random_weight(8, 3, rng, eps=1e-13)
        # W^{-1} = eps I + U diag(sigma - eps) U^T in 50 digits
        U = mp.matrix(W.U.tolist())
        D = mp.diag([mp.mpf(s) - mp.mpf(W.eps) for s in W.sigma])
        Winv = mp.mpf(W.eps) * mp.eye(8) + U * D * U.T
        X = np.zeros((8, 8))
        for j in range(8):
            rows, sl = op.column(j)
            if rows.size == 0:
                continue
            G = mp.matrix([[Winv[a, b] for b in rows] for a in rows])
            lam = mp.lu_solve(G, mp.matrix(M[sl].tolist()))
            for i in range(8):
                X[i, j] = float(sum(Winv[i, rows[a]] * lam[a] for a in range(rows.size)))
        assert rel(x_update_completion(op, M, W), X) <= 1e-9


class TestSolve:
    def test_fully_observed(self, rng):
        X = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 5))
        op = measure.sample_mask(4, 5, 1.0)
        rep = solve(op, op.apply(X), SolverConfig(K=2))
        assert rep.iterations == 1
        assert np.allclose(rep.X_final, X, atol=1e-12)
        assert rep.stop_reason == StopReason.EPS_ZERO

    @pytest.mark.xfail(strict=True, reason="sublinear convergence t_l ~ 1 - 2/(l+2); see decisions ledger")
    def test_two_by_two_nuclear_norm_example(self):
        op = measure.completion_op(2, 2, [(0, 0), (0, 1), (1, 0)])
        rep = solve(op, np.ones(3), SolverConfig(K=1))
        assert rep.X_final[1, 1] == pytest.approx(1.0, abs=1e-6)

    def test_two_by_two_approaches_one(self):
        op = measure.completion_op(2, 2, [(0, 0), (0, 1), (1, 0)])
        t = [solve(op, np.ones(3), SolverConfig(K=1, max_iter=it)).X_final[1, 1] for it in (10, 50, 200)]
        assert 0 < t[0] < t[1] < t[2] < 1

    def test_matches_reference_loop(self, rng):
        for op in (measure.sample_mask(6, 7, 0.5, seed=1), measure.gaussian_op(5, 6, 20, seed=2)):
            X0 = 0.2 * rng.standard_normal((op.n, 2)) @ rng.standard_normal((2, op.p))
            M = op.apply(X0)
            rep = solve(op, M, SolverConfig(K=2, max_iter=15), store_iterates=True)
            ref = reference_irls(op, M, 2, 1.0, rep.iterations)
            for a, b in zip(rep.iterates, ref):
                assert rel(a, b) <= 1e-8

    def test_path_equivalence(self):
        X0 = 0.1 * bench.gen_lowrank(20, 20, 2, seed=7)
        op = measure.sample_mask(20, 20, 0.4, seed=7)
        M = op.apply(X0)
        a = solve(op, M, SolverConfig(K=2, path="woodbury", max_iter=20), store_iterates=True)
        b = solve(op, M, SolverConfig(K=2, path="dense", max_iter=20), store_iterates=True)
        assert a.iterations == b.iterations == 20
        assert a.final_eps < 1.0
        for x, y in zip(a.iterates, b.iterates):
            assert rel(x, y) <= 1e-7

    def test_path_equivalence_down_to_eps_zero(self):
        X0 = bench.gen_lowrank(20, 20, 2, seed=3)
        op = measure.sample_mask(20, 20, 0.7, seed=3)
        M = op.apply(X0)
        a = solve(op, M, SolverConfig(K=2, path="woodbury"), store_iterates=True)
        b = solve(op, M, SolverConfig(K=2, path="dense"), store_iterates=True)
        assert a.stop_reason == b.stop_reason == StopReason.EPS_ZERO
        assert a.iterations == b.iterations
        for x, y in zip(a.iterates, b.iterates):
            assert rel(x, y) <= 1e-7

    def test_invariants_along_run(self):
        X0 = bench.gen_lowrank(15, 15, 2, seed=1)
        op = measure.sample_mask(15, 15, 0.6, seed=1)
        M = op.apply(X0)
        cfg = SolverConfig(K=2)
        rep = solve(op, M, cfg, store_iterates=True)
        eps = rep.column("eps")
        assert np.all(np.diff(eps) <= 0)
        for X, rec in zip(rep.iterates, rep.trace):
            assert np.linalg.norm(op.apply(X) - M) <= 1e-8 * np.linalg.norm(M)
            if rec.eps > 0 and rec.eps == cfg.gamma * rec.sigma_k_plus_1:
                tail = np.linalg.norm(X - matcore.truncate_k(matcore.svd(X), cfg.K), 2)
                assert tail <= rec.eps / cfg.gamma * (1 + 1e-10)

    def test_deterministic(self):
        X0 = bench.gen_lowrank(12, 10, 2, seed=3)
        op = measure.sample_mask(12, 10, 0.5, seed=3)
        a = solve(op, op.apply(X0), SolverConfig(K=2))
        b = solve(op, op.apply(X0), SolverConfig(K=2))
        assert a.iterations == b.iterations and a.stop_reason == b.stop_reason
        assert np.array_equal(a.X_final, b.X_final)

    def test_tall_equals_transposed_wide(self):
        X0 = bench.gen_lowrank(9, 6, 2, seed=2)
        op = measure.sample_mask(9, 6, 0.6, seed=2)
        rep = solve(op, op.apply(X0), SolverConfig(K=2, max_iter=30))
        op_t, perm = op.transpose()
        rep_t = solve(op_t, op.apply(X0)[perm], SolverConfig(K=2, max_iter=30))
        assert np.allclose(rep.X_final, rep_t.X_final.T, atol=1e-12)
        assert rep.X_final.shape == (9, 6)

    def test_small_gamma_regime(self):
        X0 = bench.gen_lowrank(10, 10, 1, seed=0)
        op = measure.sample_mask(10, 10, 0.6, seed=0)
        rep = solve(op, op.apply(X0), SolverConfig(K=1, gamma=0.1, max_iter=40))
        assert np.all(rep.column("eps") <= 0.1 * rep.column("sigma_k_plus_1") + 1e-15)
        assert analysis.check_monotonicity(rep).passed

    def test_large_dimension_uses_partial_svd(self):
        X0 = bench.gen_lowrank(300, 300, 3, seed=0)
        op = measure.sample_mask(300, 300, 0.3, seed=0)
        rep = solve(op, op.apply(X0), SolverConfig(K=3, max_iter=4))
        assert np.any(np.isnan(rep.column("nuclear_norm")))
        assert np.all(rep.column("residual") <= 1e-8 * np.linalg.norm(op.apply(X0)))
        assert analysis.check_monotonicity(rep).passed

    @pytest.mark.parametrize(
        "cfg", [SolverConfig(K=0), SolverConfig(K=5), SolverConfig(K=1, gamma=0), SolverConfig(K=1, path="x")]
    )
    def test_config_validation(self, cfg):
        op = measure.sample_mask(5, 5, 0.5)
        with pytest.raises(InvalidArgumentError):
            solve(op, np.zeros(op.m), cfg)

    def test_woodbury_needs_completion(self):
        op = measure.gaussian_op(3, 3, 4)
        with pytest.raises(InvalidArgumentError):
            solve(op, np.zeros(4), SolverConfig(K=1, path="woodbury"))

    def test_measurement_length(self):
        op = measure.sample_mask(4, 4, 0.5)
        with pytest.raises(InvalidInputError):
            solve(op, np.zeros(op.m + 1), SolverConfig(K=1))
        with pytest.raises(InvalidInputError):
            solve(op, np.full(op.m, np.nan), SolverConfig(K=1))
