import numpy as np
import pytest

from cdtrack.errors import DimensionMismatchError, NumericalConsistencyError
from cdtrack.fourier import circ_correlate, dft2, hermitian_symmetrize, idft2

from oracles import direct_circular_correlation


def test_dft2_of_impulse_is_flat():
    p = np.zeros((4, 4))
    p[0, 0] = 1.0
    spec = dft2(p)
    assert np.allclose(spec, np.ones((4, 4)), atol=1e-14)


def test_dft2_of_constant_concentrates_at_dc():
    spec = dft2(np.full((4, 4), 2.0))
    assert abs(spec[0, 0] - 32.0) < 1e-12
    off_dc = spec.copy()
    off_dc[0, 0] = 0.0
    assert np.abs(off_dc).max() < 1e-12


def test_parseval_random_8x8():
    rng = np.random.default_rng(0)
    p = rng.standard_normal((8, 8))
    direct = float((p**2).sum())
    via_spectrum = float((np.abs(dft2(p)) ** 2).sum()) / 64
    assert abs(direct - via_spectrum) <= 1e-10 * abs(direct)


@pytest.mark.parametrize("shape", [(1, 1), (2, 3), (8, 8), (17, 31)])
def test_round_trip_identity(shape):
    rng = np.random.default_rng(hash(shape) % 2**32)
    p = rng.standard_normal(shape)
    back = idft2(dft2(p))
    assert np.abs(back - p).max() <= 1e-10 * max(1.0, np.abs(p).max())


@pytest.mark.parametrize("shape", [(1, 1), (2, 3), (8, 8), (17, 31)])
def test_parseval_many_sizes(shape):
    rng = np.random.default_rng(1 + shape[0] * 100 + shape[1])
    p = rng.standard_normal(shape)
    m = shape[0] * shape[1]
    direct = float((p**2).sum())
    via = float((np.abs(dft2(p)) ** 2).sum()) / m
    assert abs(direct - via) <= 1e-10 * max(1.0, abs(direct))


def test_linearity():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((6, 7))
    b = rng.standard_normal((6, 7))
    alpha, beta = 2.5, -1.25
    lhs = dft2(alpha * a + beta * b)
    rhs = alpha * dft2(a) + beta * dft2(b)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_dft2_rejects_empty():
    with pytest.raises(DimensionMismatchError):
        dft2(np.zeros((0, 4)))


def test_dft2_rejects_nonfinite():
    p = np.zeros((3, 3))
    p[1, 1] = np.nan
    with pytest.raises(NumericalConsistencyError):
        dft2(p)


def test_idft2_of_flat_spectrum_is_impulse():
    out = idft2(np.ones((4, 4), dtype=complex))
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    assert np.abs(out - expected).max() < 1e-14


def test_idft2_round_trip_6x5():
    rng = np.random.default_rng(3)
    p = rng.standard_normal((6, 5))
    assert np.abs(idft2(dft2(p)) - p).max() < 1e-10


def test_idft2_symmetrized_spectrum_is_real():
    rng = np.random.default_rng(4)
    q = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    sym = hermitian_symmetrize(q)
    raw = np.fft.ifft2(sym)
    assert np.abs(raw.imag).max() < 1e-12
    assert np.abs(idft2(sym) - raw.real).max() == 0.0


def test_idft2_rejects_asymmetric_spectrum():
    q = np.zeros((4, 4), dtype=complex)
    q[1, 1] = 1j  # no conjugate partner at (3, 3)
    with pytest.raises(NumericalConsistencyError):
        idft2(q)


def test_correlate_with_impulse_is_identity():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((5, 6))
    b = np.zeros((5, 6))
    b[0, 0] = 1.0
    assert np.abs(circ_correlate(a, b) - a).max() < 1e-12


def test_correlate_preserves_shift():
    a = np.zeros((4, 4))
    a[1, 2] = 1.0
    b = np.zeros((4, 4))
    b[0, 0] = 1.0
    out = circ_correlate(a, b)
    expected = np.zeros((4, 4))
    expected[1, 2] = 1.0
    assert np.abs(out - expected).max() < 1e-12


def test_correlate_matches_direct_loop_7x7():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((7, 7))
    b = rng.standard_normal((7, 7))
    assert np.abs(circ_correlate(a, b) - direct_circular_correlation(a, b)).max() < 1e-9


@pytest.mark.parametrize("shape", [(2, 2), (3, 5), (8, 8), (16, 16), (5, 16)])
def test_correlate_matches_direct_loop_many_sizes(shape):
    rng = np.random.default_rng(7 + shape[0] * 31 + shape[1])
    a = rng.standard_normal(shape)
    b = rng.standard_normal(shape)
    assert np.abs(circ_correlate(a, b) - direct_circular_correlation(a, b)).max() < 1e-9


def test_correlate_rejects_mismatched_shapes():
    with pytest.raises(DimensionMismatchError):
        circ_correlate(np.zeros((3, 3)), np.zeros((3, 4)))
