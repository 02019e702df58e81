import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eftqdi.encoding import LinearEncoder, psi_at, verify_pe, window_gram

vec3 = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).map(np.array)


def test_cyclic_basis_first_and_wrap():
    enc = LinearEncoder(3)
    np.testing.assert_array_equal(psi_at(enc, 1), [1, 0, 0])
    np.testing.assert_array_equal(psi_at(enc, 4), [1, 0, 0])
    np.testing.assert_array_equal(psi_at(enc, 3), [0, 0, 1])


def test_scalar_schedule():
    enc = LinearEncoder(1)
    assert all(psi_at(enc, k)[0] == 1.0 for k in range(1, 10))


def test_k_is_one_based():
    with pytest.raises(ValueError):
        LinearEncoder(3).psi(0)


@pytest.mark.parametrize("h,expected", [(3, 1 / 3), (2, 0.0), (6, 1 / 3)])
def test_cyclic_pe_bound(h, expected):
    assert verify_pe(LinearEncoder(3), h) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_cyclic_with_period_window_is_one_over_n(n):
    assert verify_pe(LinearEncoder(n)) == pytest.approx(1 / n, abs=1e-12)


def test_explicit_schedule():
    enc = LinearEncoder(2, vectors=[[1.0, 1.0], [1.0, -1.0]])
    assert enc.period == 2 and enc.h_psi == 2
    assert enc.psi_bar == pytest.approx(np.sqrt(2))
    assert verify_pe(enc) == pytest.approx(1.0, abs=1e-12)


def test_explicit_schedule_dimension_checked():
    with pytest.raises(ValueError):
        LinearEncoder(3, vectors=[[1.0, 0.0]])


@given(st.integers(1, 10_000))
def test_certificate_bounds_every_window(k):
    enc = LinearEncoder(2, vectors=[[1.0, 0.2], [0.1, -1.0], [0.5, 0.5]])
    cert = verify_pe(enc, 3)
    assert np.linalg.eigvalsh(window_gram(enc, k, 3))[0] >= cert - 1e-12


@given(st.integers(1, 100), vec3, vec3, st.floats(-100, 100))
def test_encoding_is_linear(k, a, b, c):
    enc = LinearEncoder(3, vectors=[[0.3, -1.0, 2.0], [1.0, 1.0, 1.0]])
    scale = 1.0 + abs(enc.encode(k, a)) + abs(enc.encode(k, b))
    assert abs(enc.encode(k, a + b) - enc.encode(k, a) - enc.encode(k, b)) <= 1e-12 * scale
    assert abs(enc.encode(k, c * a) - c * enc.encode(k, a)) <= 1e-12 * (1.0 + abs(c)) * scale
