import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from vibcal.windows import (
    WindowKind,
    coherent_gain,
    leakage_factor,
    sinpi,
    window_samples,
    window_spectrum,
)

RECT, HANN = WindowKind.RECTANGULAR, WindowKind.HANN


def direct_transform(kind, T, n, f):
    """Brute-force discrete transform, the definition summed term by term."""
    w = window_samples(kind, n)
    t = np.arange(n) * (T / n)
    return (T / n) * np.sum(w * np.exp(2j * np.pi * f * t))


def test_rectangular_samples():
    assert window_samples(RECT, 4).tolist() == [1, 1, 1, 1]


def test_hann_four_points_exact():
    assert window_samples(HANN, 4).tolist() == [0.0, 0.5, 1.0, 0.5]


def test_hann_sum_is_half_length():
    for n in range(4, 1025, 2):
        oracle = math.fsum(0.5 * (1 - math.cos(2 * math.pi * k / n)) for k in range(n))
        assert oracle == pytest.approx(n / 2, rel=1e-14)
        assert np.sum(window_samples(HANN, n)) == pytest.approx(oracle, rel=1e-13)


@pytest.mark.parametrize("n", [0, 1])
def test_too_short_window_rejected(n):
    with pytest.raises(ValueError):
        window_samples(HANN, n)


def test_kind_parsing():
    assert WindowKind.parse("Hanning") is HANN
    assert WindowKind.parse("rectangular") is RECT
    with pytest.raises(ValueError):
        WindowKind.parse("kaiser")


def test_sinpi_exact_at_integers():
    x = np.arange(-1000, 1001, dtype=float)
    assert np.all(sinpi(x) == 0.0)


@pytest.mark.parametrize("kind", [RECT, HANN])
def test_dc_gain(kind):
    n, T = 1000, 2.5
    assert window_spectrum(kind, T, n, 0.0) == pytest.approx(T * coherent_gain(kind, n), rel=1e-15)


def test_rect_dc_is_record_length():
    assert window_spectrum(RECT, 3.0, 77, 0.0) == 3.0


def test_rect_nulls_at_bins():
    T, n = 1.0, 10000
    for k in list(range(-50, 0)) + list(range(1, 51)) + [997, 4999, -3333]:
        assert abs(window_spectrum(RECT, T, n, k / T)) < 1e-9 * T


def test_hann_nulls_beyond_first_bin():
    T, n = 1.0, 10000
    for k in list(range(-50, -1)) + list(range(2, 51)) + [997, 4999]:
        assert abs(window_spectrum(HANN, T, n, k / T)) < 1e-9 * T
    # first sidelobe bins are not nulled: -T/4 each, by the three-term identity
    assert window_spectrum(HANN, T, n, 1 / T) == pytest.approx(-0.25 * T, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from([RECT, HANN]), n=st.integers(2, 600),
       T=st.floats(0.01, 100), fT=st.floats(-3000, 3000))
def test_closed_form_matches_direct_sum(kind, n, T, fT):
    f = fT / T
    assert abs(window_spectrum(kind, T, n, f) - direct_transform(kind, T, n, f)) <= 1e-9 * T


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from([RECT, HANN]), n=st.integers(2, 400), f=st.floats(-500, 500))
def test_conjugate_symmetry(kind, n, f):
    T = 1.7
    a = window_spectrum(kind, T, n, -f)
    b = np.conj(window_spectrum(kind, T, n, f))
    assert abs(a - b) <= 1e-12 * T


def test_array_input_matches_scalar():
    f = np.linspace(-5, 5, 11)
    arr = window_spectrum(HANN, 2.0, 64, f)
    assert np.allclose(arr, [window_spectrum(HANN, 2.0, 64, float(x)) for x in f], rtol=0, atol=1e-15)


@pytest.mark.parametrize("fT", [0.3, 2.5, 10.25, 40.0, 99.5])
def test_rect_converges_to_continuous_sinc(fT):
    T, n = 2.0, 4096
    f = fT / T
    continuous = T * np.sinc(fT) * np.exp(1j * np.pi * fT)
    bound = T * (np.pi * fT) ** 2 / (6 * n**2) + np.pi * abs(fT) * T / n
    assert abs(window_spectrum(RECT, T, n, f) - continuous) <= bound


def test_parseval_continuous_form():
    T = 1.7
    inner, _ = integrate.quad(lambda f: (T * np.sinc(f * T)) ** 2, -50 / T, 50 / T,
                              limit=2000, epsabs=0, epsrel=1e-12)
    # tail of sinc^2 beyond |x| = 50, both sides: (2/pi)*(pi/2 - Si(100*pi)) * T
    tail = 2 * T * (math.pi / 2 - special.sici(100 * math.pi)[0]) / math.pi
    assert inner + tail == pytest.approx(T, rel=1e-6)


@pytest.mark.parametrize("n", [8, 101, 1000])
def test_parseval_discrete_over_one_period(n):
    T = 2.0
    fs = n / T
    m = 4 * n
    f = np.arange(m) * (fs / m)
    mean_sq = np.mean(np.abs(window_spectrum(RECT, T, n, f)) ** 2)
    assert mean_sq * fs == pytest.approx(T, rel=1e-12)


def test_leakage_factor_on_frequency():
    assert leakage_factor(RECT, None, 3.0, 3.0, 10.0, 1000) == pytest.approx(1.0, abs=1e-15)
    assert leakage_factor(HANN, None, 3.0, 3.0, 10.0, 1000) == pytest.approx(1.0, rel=1e-12)


def test_leakage_factor_nulls():
    for k in (-5, -2, -1, 1, 2, 7):
        assert leakage_factor(RECT, None, 1.0, 1.0 + k, 30.0, 30000) < 1e-9


def test_hann_leaks_less_than_rect():
    assert leakage_factor(HANN, None, 1.0, 1.25, 30.0, 3000) < leakage_factor(RECT, None, 1.0, 1.25, 30.0, 3000)


def test_leakage_factor_bad_fv():
    with pytest.raises(ValueError):
        leakage_factor(RECT, None, 0.0, 1.0, 1.0, 10)


def test_spectrum_preconditions():
    with pytest.raises(ValueError):
        window_spectrum(RECT, 0.0, 10, 1.0)
    with pytest.raises(ValueError):
        window_spectrum(RECT, 1.0, 1, 1.0)
