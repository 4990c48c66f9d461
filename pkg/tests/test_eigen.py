import numpy as np
import pytest

from framelab.errors import EigenNoConvergence
from framelab.utils.eigen import (
    extreme_eigenvalues,
    hermitian_jacobi_eigenvalues,
    jacobi_eigenvalues,
    power_iteration,
    rayleigh_quotient,
    real_embedding,
)

SPECTRUM = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 5.0])


def hermitian_with(values, seed=11):
    rng = np.random.default_rng(seed)
    n = len(values)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    S = q @ np.diag(values) @ q.conj().T
    return (S + S.conj().T) / 2


def test_jacobi_matches_lapack_on_real_symmetric():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((9, 9))
    A = A + A.T
    values, sweeps, off = jacobi_eigenvalues(A)
    assert np.allclose(values, np.linalg.eigvalsh(A), atol=1e-8)
    assert sweeps >= 1
    assert off <= 1e-10 * np.linalg.norm(A)


def test_jacobi_leaves_input_untouched():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    copy = A.copy()
    values, _, _ = jacobi_eigenvalues(A)
    assert np.allclose(values, [1.0, 3.0])
    assert np.array_equal(A, copy)


def test_jacobi_reports_non_convergence():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((10, 10))
    with pytest.raises(EigenNoConvergence):
        jacobi_eigenvalues(A + A.T, max_sweeps=1)


def test_real_embedding_doubles_eigenvalues():
    S = hermitian_with(SPECTRUM)
    values = np.linalg.eigvalsh(real_embedding(S))
    assert np.allclose(values, np.repeat(SPECTRUM, 2))


def test_hermitian_jacobi():
    values, _, _ = hermitian_jacobi_eigenvalues(hermitian_with(SPECTRUM))
    assert np.allclose(values, SPECTRUM, atol=1e-8)


def test_power_iteration_top():
    top, iterations, residual = power_iteration(hermitian_with(SPECTRUM))
    assert top == pytest.approx(5.0, abs=1e-6)
    assert residual <= 1e-8
    assert iterations > 1


@pytest.mark.parametrize("method", ["auto", "dense", "jacobi", "power"])
def test_extreme_eigenvalues_agree(method):
    result = extreme_eigenvalues(hermitian_with(SPECTRUM), method=method)
    assert result.lowest == pytest.approx(0.5, abs=1e-6)
    assert result.highest == pytest.approx(5.0, abs=1e-6)


def test_auto_switches_to_power_above_cap():
    assert extreme_eigenvalues(hermitian_with(SPECTRUM), dense_cap=4).method == "power"
    assert extreme_eigenvalues(hermitian_with(SPECTRUM)).method == "dense"


def test_unknown_method():
    with pytest.raises(ValueError):
        extreme_eigenvalues(np.eye(2), method="qr")


def test_rayleigh_quotient_between_extremes():
    S = hermitian_with(SPECTRUM)
    rng = np.random.default_rng(2)
    for _ in range(20):
        v = rng.standard_normal(len(SPECTRUM)) + 1j * rng.standard_normal(len(SPECTRUM))
        assert 0.5 - 1e-12 <= rayleigh_quotient(S, v) <= 5.0 + 1e-12
