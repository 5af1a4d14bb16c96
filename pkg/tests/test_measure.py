import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowrank_irls import measure
from lowrank_irls.exceptions import FormatError, InvalidArgumentError, InvalidInputError, NoKernelError


def ops(rng):
    yield measure.gaussian_op(4, 5, 9, seed=3)
    yield measure.sample_mask(6, 5, 0.4, seed=1)
    yield measure.completion_op(3, 4, [(0, 0), (2, 0), (1, 3)])  # empty columns 1 and 2


class TestGaussian:
    def test_deterministic(self):
        a = measure.gaussian_op(3, 4, 5, seed=9).coefficients()
        b = measure.gaussian_op(3, 4, 5, seed=9).coefficients()
        assert np.array_equal(a, b)
        assert not np.array_equal(a, measure.gaussian_op(3, 4, 5, seed=10).coefficients())

    def test_moments(self):
        op = measure.gaussian_op(20, 20, 300, seed=0)
        A = op.coefficients()
        N = A.size
        assert abs(A.mean()) < 4 * np.sqrt(1.0 / op.m) / np.sqrt(N)
        assert A.var() * op.m == pytest.approx(1.0, rel=0.02)

    def test_isometry_in_expectation(self, rng):
        X = rng.standard_normal((4, 5))
        X /= np.linalg.norm(X)
        vals = [np.sum(measure.gaussian_op(4, 5, 12, seed=s).apply(X) ** 2) for s in range(200)]
        assert 0.8 <= np.mean(vals) <= 1.2

    def test_too_many_measurements(self):
        with pytest.raises(InvalidArgumentError):
            measure.gaussian_op(2, 2, 5)


class TestCompletion:
    def test_apply_example(self):
        op = measure.completion_op(2, 2, [(0, 0), (1, 1)])
        assert np.array_equal(op.apply(np.array([[1.0, 2.0], [3.0, 4.0]])), [1, 4])

    def test_full_observation_is_bijection(self, rng):
        op = measure.sample_mask(3, 4, 1.0, seed=0)
        X = rng.standard_normal((3, 4))
        y = op.apply(X)
        assert sorted(y) == sorted(X.ravel())
        assert np.array_equal(op.adjoint(y), X)

    def test_empty_column_block(self):
        op = measure.completion_op(3, 4, [(0, 0), (2, 0), (1, 3)])
        assert list(op.counts) == [2, 0, 0, 1]
        rows, sl = op.column(1)
        assert rows.size == 0 and sl.stop == sl.start

    def test_block_order(self):
        op = measure.completion_op(3, 3, [(2, 1), (0, 2), (1, 1), (0, 0)])
        assert list(zip(op.rows, op.cols)) == [(0, 0), (1, 1), (2, 1), (0, 2)]
        assert np.array_equal(op.block_order([10, 20, 30, 40]), [40, 30, 10, 20])

    def test_mask_sampling(self):
        a = measure.sample_mask(10, 12, 0.5, seed=4)
        b = measure.sample_mask(10, 12, 0.5, seed=4)
        assert a.m == 60
        assert np.array_equal(a.mask(), b.mask())
        assert not np.array_equal(a.mask(), measure.sample_mask(10, 12, 0.5, seed=5).mask())

    @given(st.integers(1, 12), st.integers(1, 12), st.floats(0.01, 1.0), st.integers(0, 2**31))
    def test_mask_size(self, n, p, frac, seed):
        m = int(np.floor(frac * n * p))
        if m < 1:
            with pytest.raises(InvalidArgumentError):
                measure.sample_mask(n, p, frac, seed)
            return
        op = measure.sample_mask(n, p, frac, seed)
        assert op.m == m and op.mask().sum() == m

    @pytest.mark.parametrize("pairs", [[(0, 0), (0, 0)], [(3, 0)], [(0, -1)], []])
    def test_bad_indices(self, pairs):
        with pytest.raises(InvalidArgumentError):
            measure.completion_op(3, 3, pairs)

    def test_projector(self, rng):
        op = measure.sample_mask(5, 6, 0.5, seed=2)
        X = rng.standard_normal((5, 6))
        P = op.adjoint(op.apply(X))
        assert np.array_equal(P, np.where(op.mask(), X, 0.0))

    def test_dense_agrees(self, rng):
        op = measure.sample_mask(5, 4, 0.6, seed=8)
        dense = op.to_dense()
        X, lam = rng.standard_normal((5, 4)), rng.standard_normal(op.m)
        assert np.allclose(op.apply(X), dense.apply(X), atol=1e-12)
        assert np.allclose(op.adjoint(lam), dense.adjoint(lam), atol=1e-12)
        assert np.allclose(op.adjoint_basis(), dense.adjoint_basis())

    def test_transpose(self, rng):
        op = measure.sample_mask(4, 7, 0.5, seed=3)
        op_t, perm = op.transpose()
        X = rng.standard_normal((4, 7))
        assert np.array_equal(op_t.apply(X.T), op.apply(X)[perm])


class TestOperatorContract:
    def test_zero_maps_to_zero(self, rng):
        for op in ops(rng):
            assert not np.any(op.apply(np.zeros(op.shape)))
            assert not np.any(op.adjoint(np.zeros(op.m)))

    def test_linearity(self, rng):
        for op in ops(rng):
            X, Y = rng.standard_normal(op.shape), rng.standard_normal(op.shape)
            a, b = 1.7, -0.3
            lhs = op.apply(a * X + b * Y)
            assert np.allclose(lhs, a * op.apply(X) + b * op.apply(Y), atol=1e-12)

    def test_adjoint_identity(self, rng):
        for op in ops(rng):
            for _ in range(100):
                X, lam = rng.standard_normal(op.shape), rng.standard_normal(op.m)
                lhs, rhs = op.apply(X) @ lam, np.sum(X * op.adjoint(lam))
                assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_shape_checks(self, rng):
        op = measure.gaussian_op(3, 3, 4)
        with pytest.raises(InvalidInputError):
            op.apply(np.zeros((3, 4)))
        with pytest.raises(InvalidInputError):
            op.adjoint(np.zeros(5))


class TestKernel:
    def test_in_kernel(self, rng):
        for op in ops(rng):
            H = op.kernel_sample(seed=1)
            assert np.linalg.norm(op.apply(H)) <= 1e-10 * np.linalg.norm(H)
            assert np.linalg.norm(H) > 0

    def test_completion_zero_on_observed(self):
        op = measure.sample_mask(5, 5, 0.5, seed=0)
        H = op.kernel_sample(seed=2)
        assert not np.any(H[op.mask()])
        assert np.all(H[~op.mask()] != 0)

    def test_independent_samples(self):
        for op in (measure.gaussian_op(4, 4, 6, seed=1), measure.sample_mask(4, 4, 0.5, seed=1)):
            H1, H2 = op.kernel_sample(seed=1).ravel(), op.kernel_sample(seed=2).ravel()
            G = np.array([[H1 @ H1, H1 @ H2], [H2 @ H1, H2 @ H2]])
            assert np.linalg.det(G) > 1e-8 * np.trace(G) ** 2

    def test_trivial_kernel(self):
        with pytest.raises(NoKernelError):
            measure.sample_mask(2, 2, 1.0).kernel_sample()


class TestMaskFile:
    def test_roundtrip(self):
        op = measure.sample_mask(5, 6, 0.3, seed=1)
        op2, order = measure.read_mask(measure.write_mask(op))
        assert np.array_equal(op2.mask(), op.mask())
        assert np.array_equal(order, np.arange(op.m))

    def test_file_order(self, rng):
        X = rng.standard_normal((3, 3))
        pairs = [(2, 2), (0, 1), (1, 0)]
        op, order = measure.read_mask("3 3\n" + "\n".join(f"{i} {j}" for i, j in pairs))
        file_values = np.array([X[i, j] for i, j in pairs])
        assert np.array_equal(op.apply(X), file_values[order])

    @pytest.mark.parametrize("text", ["", "3 3\n", "3 3\n0\n", "3 3\n0 5\n", "a b\n0 0\n", "3 3\n0 0\n0 0\n"])
    def test_malformed(self, text):
        with pytest.raises(FormatError):
            measure.read_mask(text)
