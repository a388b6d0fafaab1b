import numpy as np
import pytest

from app.errors import DimensionMismatch, NoConvergence, NotPositiveDefinite
from app.numerics import RandomStream, dominant_eigenpair, hermitian_solve


def test_hermitian_solve_identity():
    x = hermitian_solve(np.eye(2), np.array([1.0, 1j]))
    assert np.allclose(x, [1.0, 1j])


def test_hermitian_solve_diagonal():
    x = hermitian_solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
    assert np.allclose(x, [1.0, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_hermitian_solve_residual(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    A = B.conj().T @ B + np.eye(6)
    b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    x = hermitian_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_hermitian_solve_matrix_rhs():
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    B = np.eye(2)
    assert np.allclose(hermitian_solve(A, B), np.linalg.inv(A))


def test_hermitian_solve_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        hermitian_solve(np.diag([1.0, -1.0]), np.ones(2))


def test_hermitian_solve_rejects_shape():
    with pytest.raises(DimensionMismatch):
        hermitian_solve(np.eye(3), np.ones(2))


def test_dominant_eigenpair_diagonal_like():
    A = np.array([[2.0, 1e-12], [1e-12, 1.0]])
    lam, v = dominant_eigenpair(A)
    assert lam == pytest.approx(2.0, rel=1e-9)
    assert v[-1] == 1.0
    assert np.all(v > 0)


def test_dominant_eigenpair_tied_moduli():
    with pytest.raises(NoConvergence):
        dominant_eigenpair(np.array([[0.0, 1.0], [1.0, 0.0]]), max_iter=500)


@pytest.mark.parametrize("seed", range(5))
def test_dominant_eigenpair_matches_dense_solver(seed):
    A = np.random.default_rng(seed).uniform(0.1, 1.0, size=(5, 5))
    lam, v = dominant_eigenpair(A)
    w, V = np.linalg.eig(A)
    i = int(np.argmax(w.real))
    ref = np.abs(V[:, i].real)
    ref = ref / ref[-1]
    assert lam == pytest.approx(w[i].real, rel=1e-8)
    assert np.allclose(v, ref, rtol=1e-8)
    assert np.linalg.norm(A @ v - lam * v) <= 1e-8 * np.linalg.norm(v) * lam


def test_dominant_eigenpair_rejects_negative():
    with pytest.raises(ValueError):
        dominant_eigenpair(np.array([[1.0, -1.0], [1.0, 1.0]]))


def test_random_stream_reproducible():
    a = RandomStream(7, 3).generator().standard_normal(1_000_000)
    b = RandomStream(7, 3).generator().standard_normal(1_000_000)
    assert np.array_equal(a, b)


def test_random_stream_addresses_are_distinct():
    base = RandomStream(7)
    draws = [
        base.generator().random(4),
        base.with_id(1).generator().random(4),
        base.substream(0).generator().random(4),
        base.substream(1).generator().random(4),
        base.substream(0, 1).generator().random(4),
        base.substream(0, 0).generator().random(4),
        RandomStream(7 + 2**32).generator().random(4),
        RandomStream(7, 2**32).generator().random(4),
    ]
    for i in range(len(draws)):
        for j in range(i + 1, len(draws)):
            assert not np.array_equal(draws[i], draws[j])


def test_random_stream_independent_of_consumption_order():
    base = RandomStream(99)
    first = [base.substream(i).generator().random() for i in range(5)]
    reverse = [base.substream(i).generator().random() for i in reversed(range(5))]
    assert first == list(reversed(reverse))


def test_random_stream_torch_seed_fits_63_bits():
    seed = RandomStream(5).torch_seed()
    assert 0 <= seed < 2**63
    assert seed == RandomStream(5).torch_seed()


def test_random_stream_rejects_negative():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(1).substream(2**32)
