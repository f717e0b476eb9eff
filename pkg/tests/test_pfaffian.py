import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fls.pfaffian import SkewMatrix, pfaffian, pfaffian_batch_small, pfaffian_submatrix

from conftest import random_skew_complex


def test_2x2_definition():
    a = 3.7 - 1.2j
    m = np.array([[0, a], [-a, 0]])
    assert pfaffian(m) == pytest.approx(a)


def test_4x4_closed_form(rng):
    m = random_skew_complex(4, rng)
    expected = m[0, 1] * m[2, 3] - m[0, 2] * m[1, 3] + m[0, 3] * m[1, 2]
    assert pfaffian(m) == pytest.approx(expected, rel=1e-12)


def test_pf_squared_is_det(rng):
    for n in (8, 12, 20, 40):
        m = random_skew_complex(n, rng)
        pf = pfaffian(m)
        det = np.linalg.det(m)
        assert pf ** 2 == pytest.approx(det, rel=1e-8)


def test_congruence_transform(rng):
    # Pf(B A B^T) = det(B) Pf(A)
    for n in (6, 12, 20):
        a = random_skew_complex(n, rng)
        b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        lhs = pfaffian(b @ a @ b.T)
        rhs = np.linalg.det(b) * pfaffian(a)
        assert lhs == pytest.approx(rhs, rel=1e-7)


def test_block_diagonal_product(rng):
    lams = rng.normal(size=5)
    m = np.zeros((10, 10))
    for i, lam in enumerate(lams):
        m[2 * i, 2 * i + 1] = lam
        m[2 * i + 1, 2 * i] = -lam
    assert pfaffian(m) == pytest.approx(np.prod(lams), rel=1e-12)


def test_odd_dimension_and_singular():
    assert pfaffian(np.zeros((3, 3))) == 0
    assert pfaffian(np.zeros((4, 4))) == 0
    assert pfaffian(np.zeros((0, 0))) == 1


def test_skewmatrix_antisymmetrizes(rng):
    raw = rng.normal(size=(6, 6))
    sk = SkewMatrix(raw)
    assert np.max(np.abs(sk.entries + sk.entries.T)) < 1e-15
    assert sk.input_sym_residual > 0


def test_submatrix_conventions(rng):
    m = random_skew_complex(4, rng)
    assert pfaffian_submatrix(m, []) == 1
    assert pfaffian_submatrix(m, [0, 1, 2, 3]) == pytest.approx(pfaffian(m))
    assert pfaffian_submatrix(m, [0, 1]) == pytest.approx(m[0, 1])
    with pytest.raises(ValueError):
        pfaffian_submatrix(m, [1, 0])
    with pytest.raises(IndexError):
        pfaffian_submatrix(m, [0, 7])


def test_batch_small_agrees_with_scalar(rng):
    for n in (2, 4, 6):
        batch = np.stack([random_skew_complex(n, rng) for _ in range(7)])
        got = pfaffian_batch_small(batch)
        want = np.array([pfaffian(b) for b in batch])
        np.testing.assert_allclose(got, want, rtol=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(0, 2 ** 31 - 1))
def test_pf_squared_det_property(half_n, seed):
    rng = np.random.default_rng(seed)
    m = random_skew_complex(2 * half_n, rng)
    det = np.linalg.det(m)
    assert pfaffian(m) ** 2 == pytest.approx(det, rel=1e-8, abs=1e-10)
