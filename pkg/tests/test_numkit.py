import numpy as np
import pytest

import minerr as me
from minerr.numkit import (
    as_matrix,
    as_vector,
    is_metzler,
    metzler_violations,
    positive_split,
    elementwise_leq,
    lu_solve,
    SingularMatrixError,
    Certificate,
    Infeasible,
    certifies,
    hurwitz_metzler_certificate,
)

from conftest import A_EXAMPLE, C_EXAMPLE, G1, G2, G3

RNG = np.random.default_rng(1)


class TestConstructors:
    def test_matrix_is_read_only_copy(self):
        source = [[1, 2], [3, 4]]
        M = as_matrix(source)
        assert M.dtype == float
        with pytest.raises(ValueError):
            M[0, 0] = 5.0

    def test_matrix_shape_checked(self):
        with pytest.raises(ValueError):
            as_matrix([[1, 2], [3, 4]], rows=3)
        with pytest.raises(ValueError):
            as_matrix([1, 2, 3])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            as_matrix([[1.0, np.nan]])
        with pytest.raises(ValueError):
            as_vector([np.inf])

    def test_non_numeric_rejected(self):
        with pytest.raises(TypeError):
            as_vector(["a", "b"])

    def test_vector_dimension(self):
        np.testing.assert_array_equal(as_vector([1, 2, 3], 3), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            as_vector([1, 2], 3)


class TestMetzler:
    @pytest.mark.parametrize("G", [G1, G2, G3])
    def test_worked_example_gains(self, G):
        assert is_metzler(A_EXAMPLE + G @ C_EXAMPLE)

    def test_plant_matrix_alone_is_metzler(self):
        assert is_metzler(A_EXAMPLE)

    def test_negative_off_diagonal(self):
        M = np.array([[-1.0, -0.1], [0.0, -1.0]])
        assert not is_metzler(M)
        assert metzler_violations(M) == [(0, 1, -0.1)]

    def test_diagonal_sign_irrelevant(self):
        assert is_metzler(np.array([[5.0, 0.0], [0.0, -5.0]]))
        assert metzler_violations(np.diag([-1.0, -2.0])) == []

    def test_non_square(self):
        with pytest.raises(ValueError):
            is_metzler(np.zeros((2, 3)))


class TestPositiveSplit:
    def test_parts(self):
        M = np.array([[1.0, -2.0], [0.0, -0.5]])
        plus, minus = positive_split(M)
        np.testing.assert_array_equal(plus, [[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_array_equal(minus, [[0.0, 2.0], [0.0, 0.5]])

    def test_reconstruction(self):
        M = RNG.normal(size=(4, 4))
        plus, minus = positive_split(M)
        assert np.all(plus >= 0) and np.all(minus >= 0)
        np.testing.assert_array_equal(plus - minus, M)


class TestElementwiseLeq:
    def test_order(self):
        assert elementwise_leq([0, 1, 1], [2, 3, 3])
        assert not elementwise_leq([0, 4, 1], [2, 3, 3])
        assert elementwise_leq([1.0], [1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            elementwise_leq([1, 2], [1, 2, 3])


class TestLuSolve:
    def test_solution(self):
        M = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(lu_solve(M, M @ x), x, rtol=1e-12)

    def test_matrix_right_hand_side(self):
        R = np.array([[0.0, 2.0], [1.0, 0.0]])
        np.testing.assert_allclose(lu_solve(R, np.eye(2)) @ R, np.eye(2))

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))

    def test_zero_matrix(self):
        with pytest.raises(SingularMatrixError):
            lu_solve(np.zeros((2, 2)), np.ones(2))

    def test_is_a_linalg_error(self):
        assert issubclass(SingularMatrixError, np.linalg.LinAlgError)


class TestCertificate:
    def test_row_sum_certificate_of_first_gain(self):
        M = A_EXAMPLE + G1 @ C_EXAMPLE
        ones = np.ones(3)
        epsilon = -np.max(M @ ones)
        assert epsilon == pytest.approx(0.2)
        cert = Certificate(1, ones, epsilon, matrix=M)
        assert certifies(cert, M)

    def test_row_sum_certificate_of_second_gain(self):
        M = A_EXAMPLE + G2 @ C_EXAMPLE
        np.testing.assert_allclose(M @ np.ones(3), [-1.5, -0.2, -2.5])
        assert certifies(Certificate(2, np.ones(3), -np.max(M @ np.ones(3))), M)

    def test_canonical_certificate_of_third_gain(self):
        M = A_EXAMPLE + G3 @ C_EXAMPLE
        cert = hurwitz_metzler_certificate(M, gain_index=3)
        assert cert
        assert cert.gain_index == 3
        np.testing.assert_allclose(cert.v, [1.0, 2.36, 0.45], rtol=1e-12)
        assert cert.epsilon == pytest.approx(1 / 2.36, rel=1e-12)
        assert cert.certifies(M)

    def test_certificate_rejects_wrong_rate(self):
        M = A_EXAMPLE + G1 @ C_EXAMPLE
        with pytest.raises(ValueError):
            Certificate(1, np.ones(3), 0.5, matrix=M)

    @pytest.mark.parametrize("v, epsilon", [([1.0, 0.0], 0.1), ([1.0, -1.0], 0.1), ([1.0, 1.0], 0.0)])
    def test_certificate_validation(self, v, epsilon):
        with pytest.raises(ValueError):
            Certificate(1, v, epsilon)

    def test_lyapunov(self):
        cert = Certificate(3, [1.0, 2.36, 0.45], 1 / 2.36)
        assert cert.lyapunov([1.0, 1.0, 1.0]) == pytest.approx(1 / 0.45)
        assert cert.lyapunov(cert.v) == pytest.approx(1.0)
        assert cert.lyapunov(np.zeros(3)) == 0.0
        np.testing.assert_allclose(cert.lyapunov(np.ones((4, 3))), np.full(4, 1 / 0.45))

    def test_to_dict(self):
        d = Certificate(2, [1.0, 2.0], 0.5).to_dict()
        assert d == {"gain_index": 2, "feasible": True, "v": [1.0, 2.0], "epsilon": 0.5}


class TestInfeasible:
    def test_not_hurwitz(self):
        result = hurwitz_metzler_certificate(np.array([[1.0, 0.0], [0.0, -1.0]]))
        assert isinstance(result, Infeasible)
        assert not result

    def test_singular(self):
        result = hurwitz_metzler_certificate(np.array([[0.0, 0.0], [0.0, -1.0]]))
        assert result == Infeasible("singular")

    def test_to_dict(self):
        assert Infeasible("singular", 2).to_dict() == {"gain_index": 2, "feasible": False, "reason": "singular"}


class TestPerronFrobenius:
    """For Metzler matrices, a certificate exists iff the spectral abscissa
    (the largest real part of the eigenvalues) is negative."""

    @pytest.mark.parametrize("seed", range(40))
    def test_against_characteristic_roots(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        M = rng.uniform(0.0, 1.0, size=(n, n))
        np.fill_diagonal(M, rng.uniform(-2.0 * n, 0.5, size=n))

        abscissa = np.max(np.roots(np.poly(M)).real)
        if abs(abscissa) < 1e-6:
            pytest.skip("spectral abscissa too close to zero")

        cert = hurwitz_metzler_certificate(M)
        assert bool(cert) == (abscissa < 0)
        if cert:
            assert cert.certifies(M)
            assert np.all(cert.v > 0)
            # the rate never exceeds the decay of the slowest mode.
            assert cert.epsilon <= -abscissa + 1e-9


def test_package_exports():
    assert me.hurwitz_metzler_certificate is hurwitz_metzler_certificate
    assert me.Certificate is Certificate
