import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibcal.core import ProcessingChain, SpectrumModel, Waveform, exact
from vibcal.estimator import (
    calibrate,
    diff_correction,
    first_difference,
    phase_angles,
    plan_record_length,
    process,
    sam_fit,
    second_difference,
    trim_to_cycles,
    windowed_fit,
)
from vibcal.filters import design_bandpass
from vibcal.noise import colored_noise
from vibcal.windows import WindowKind

from conftest import sine

HANN = WindowKind.HANN


def longdouble_fit(x, fv, fs, weights=None):
    """Independent fit: long-double direct sum with unreduced angles."""
    n = len(x)
    x = np.asarray(x, dtype=np.longdouble)
    w = np.ones(n, dtype=np.longdouble) if weights is None else np.asarray(weights, dtype=np.longdouble)
    k = np.arange(n, dtype=np.longdouble)
    theta = 2 * np.pi * np.longdouble(fv) / np.longdouble(fs) * k
    scale = 2 / np.sum(w)
    return complex(scale * np.sum(w * x * np.cos(theta)), scale * np.sum(w * x * np.sin(theta)))


def test_phase_angles_exact_reduction():
    theta = phase_angles(10**6, Fraction(1, 4), 1)
    assert set(np.unique(theta).tolist()) == {0.0, math.pi / 2, math.pi, 3 * math.pi / 2}


def test_pure_sine_gives_imaginary_amplitude():
    a = sam_fit(sine(1, 100, 10, amplitude=2.5), 1)
    assert a.re == pytest.approx(0.0, abs=1e-14)
    assert a.im == pytest.approx(2.5, rel=1e-14)


def test_constant_gives_zero():
    w = Waveform(np.full(1000, 3.3), 100)
    a = sam_fit(w, 1)
    assert abs(complex(a)) < 1e-14


def test_harmonic_does_not_disturb():
    fs, fv = 1000, 10
    t = np.arange(500) / fs
    x = 0.7 * np.sin(2 * np.pi * fv * t) + 0.5 * np.sin(4 * np.pi * fv * t + 1.2)
    a = sam_fit(Waveform(x, fs), fv)
    assert abs(complex(a) - 0.7j) < 1e-9


def test_non_integer_cycles_rejected():
    w = Waveform(np.zeros(1001), 1000)
    with pytest.raises(ValueError, match="trim"):
        sam_fit(w, 10)


def test_rate_checks():
    w = Waveform(np.zeros(12), 30)
    with pytest.raises(ValueError):
        sam_fit(w, 10)
    with pytest.warns(RuntimeWarning):
        sam_fit(Waveform(np.zeros(100), 100), 10)


def test_hann_fit_exact_on_integer_cycles():
    for cycles in (2, 3, 10, 37):
        w = sine(5, 500, cycles, amplitude=1.3, phase=0.4)
        got = complex(windowed_fit(w, 5, HANN))
        oracle = longdouble_fit(w.samples, 5, 500, np.sin(np.pi * np.arange(w.n) / w.n) ** 2)
        expect = 1.3j * np.exp(-0.4j)
        assert abs(got - expect) < 1e-9
        assert abs(oracle - expect) < 1e-9


def test_rect_window_identical_to_sam_fit():
    rng = np.random.default_rng(4)
    w = Waveform(rng.standard_normal(3000), 300)
    assert windowed_fit(w, 7, "rect") == sam_fit(w, 7)


def test_rect_fit_matches_longdouble_oracle():
    rng = np.random.default_rng(5)
    w = Waveform(rng.standard_normal(12300), 4920)
    assert abs(complex(sam_fit(w, 49.2)) - longdouble_fit(w.samples, 49.2, 4920)) < 1e-12


def test_hann_suppresses_nearby_tone():
    fs, fv, cycles = 1000, 10, 20
    T = cycles / fv
    t = np.arange(int(T * fs)) / fs
    tone = 1e-2 * np.sin(2 * np.pi * (fv + 2.5 / T) * t + 0.3)
    w = Waveform(np.sin(2 * np.pi * fv * t) + tone, fs)
    err_rect = abs(complex(sam_fit(w, fv)) - 1j)
    err_hann = abs(complex(windowed_fit(w, fv, HANN)) - 1j)
    assert err_hann < err_rect


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), e=st.integers(-20, 20))
def test_scale_equivariance_exact_for_powers_of_two(seed, e):
    x = np.random.default_rng(seed).standard_normal(400)
    c = 2.0**e
    a = sam_fit(Waveform(x, 400), 4)
    b = sam_fit(Waveform(c * x, 400), 4)
    assert b.re == c * a.re and b.im == c * a.im


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-1e3, 1e3))
def test_scale_equivariance(seed, c):
    x = np.random.default_rng(seed).standard_normal(400)
    a = complex(sam_fit(Waveform(x, 400), 4))
    b = complex(sam_fit(Waveform(c * x, 400), 4))
    assert abs(b - c * a) <= 1e-13 * abs(c) * (abs(a) + 1)


def test_second_difference_of_quadratic():
    fs = 8
    t = np.arange(20) / fs
    w = Waveform(0.75 * t**2, fs, unit="m")
    d = second_difference(w)
    assert d.n == 18 and d.unit == "m/s^2" and d.start_time == pytest.approx(1 / fs)
    assert np.allclose(d.samples, 1.5, rtol=0, atol=1e-12)


def test_second_difference_of_ramp():
    d = second_difference(Waveform(np.arange(10.0) * 0.5 + 2, 4))
    assert np.all(d.samples == 0.0)


def test_second_difference_short_input():
    with pytest.raises(ValueError):
        second_difference(Waveform([1.0, 2.0], 1))


def test_second_difference_of_sine():
    fv, fs = 10, 200
    w = sine(fv, fs, 5, amplitude=2.0, offset=-1)
    d = second_difference(w)
    gain = (2 * math.pi * fv) ** 2 * np.sinc(fv / fs) ** 2
    expect = -gain * 2.0 * np.sin(2 * np.pi * fv * np.arange(d.n) / fs)
    assert np.max(np.abs(d.samples - expect)) < 1e-9 * gain


def test_first_difference_of_sine():
    fv, fs = 10, 200
    d = first_difference(sine(fv, fs, 5, offset=-1))
    gain = 2 * math.pi * fv * np.sinc(2 * fv / fs)
    expect = gain * np.cos(2 * np.pi * fv * np.arange(d.n) / fs)
    assert np.max(np.abs(d.samples - expect)) < 1e-9 * gain


def test_diff_correction_values():
    z = math.pi * 0.01
    oracle = 1 - (math.sin(z) / z) ** 2
    assert 1 - diff_correction(1, 100) == pytest.approx(oracle, rel=1e-9)
    assert oracle == pytest.approx(3.2894e-4, rel=1e-4)
    # the single sinc factor stays below 0.02 % up to fv/fs = 0.01
    assert 1 - math.sqrt(diff_correction(1, 100)) < 2e-4
    assert diff_correction(1e-9, 1) == pytest.approx(1.0, abs=1e-15)
    assert diff_correction(0.5 - 1e-12, 1) == pytest.approx((2 / math.pi) ** 2, rel=1e-9)
    assert (2 / math.pi) ** 2 == pytest.approx(0.4053, abs=1e-4)
    with pytest.raises(ValueError):
        diff_correction(0.5, 1)


def test_trim_to_cycles():
    w = Waveform(np.zeros(1037), 100)
    assert trim_to_cycles(w, 1).n == 1000
    with pytest.raises(ValueError):
        trim_to_cycles(w, 1, max_trim=2)
    assert trim_to_cycles(Waveform(np.zeros(1002), 100), 1, max_trim=2).n == 1000


def test_process_degenerate_chain_is_sam_fit():
    w = sine(3, 300, 7, amplitude=0.2, phase=1.0)
    assert process(w, 3, ProcessingChain(), "sensor") == sam_fit(w, 3)


def test_process_differentiated_reference():
    fv, fs, x0 = 2, 400, 1e-3
    ref = sine(fv, fs, 10, amplitude=x0, offset=-1, unit="m")
    a = process(ref, fv, ProcessingChain(differentiate_reference=2), "reference")
    assert a.modulus() == pytest.approx((2 * math.pi * fv) ** 2 * x0, rel=1e-6)


def test_process_rejects_derivative_reference():
    ref = sine(2, 400, 10, offset=-1, unit="m/s^2")
    with pytest.raises(ValueError):
        process(ref, 2, ProcessingChain(differentiate_reference=2), "reference")


def test_process_filtered_settles():
    spec = design_bandpass(6, 1, 10, 1000)
    w = sine(10, 1000, 60)
    a = process(w, 10, ProcessingChain.filtered(spec, discard_cycles=10))
    assert a.modulus() == pytest.approx(1.0, rel=1e-3)


def test_process_too_short_after_discard():
    spec = design_bandpass(6, 1, 10, 1000)
    with pytest.raises(ValueError):
        process(sine(10, 1000, 5), 10, ProcessingChain.filtered(spec, discard_cycles=10))


def test_process_bad_role():
    with pytest.raises(ValueError):
        process(sine(1, 100, 2), 1, ProcessingChain(), "other")


def ideal_pair(fv, fs, cycles, S=0.01, a0=3.0, lag=0.0):
    x0 = a0 / (2 * math.pi * float(fv)) ** 2
    ref = sine(fv, fs, cycles, amplitude=x0, offset=-1, unit="m")
    sensor = sine(fv, fs, cycles, amplitude=-S * a0, phase=-lag, unit="V")
    return sensor, ref


@pytest.mark.parametrize("chain", [
    ProcessingChain(),
    ProcessingChain("hann"),
    ProcessingChain(differentiate_reference=2),
    ProcessingChain(differentiate_reference=1),
    ProcessingChain("hann", None, 2),
])
def test_calibrate_ideal_sensor(chain):
    sensor, ref = ideal_pair(10, 1000, 30)
    res = calibrate(sensor, ref, 10, chain)
    assert res.sensitivity == pytest.approx(0.01, rel=1e-6)
    assert abs(res.phase_delay) < 1e-6


def test_calibrate_filtered_chain_invariant():
    sensor, ref = ideal_pair(10, 1000, 40)
    base = calibrate(sensor, ref, 10, ProcessingChain())
    for order, q in ((2, 1), (6, 1), (4, 5)):
        spec = design_bandpass(order, q, 10, 1000)
        for diff in (0, 2):
            chain = ProcessingChain.filtered(spec, differentiate_reference=diff, discard_cycles=30)
            res = calibrate(sensor, ref, 10, chain)
            assert res.sensitivity == pytest.approx(base.sensitivity, rel=1e-6)
            assert abs(res.phase_delay - base.phase_delay) < 1e-6


@pytest.mark.parametrize("lag", [0.3, -1.0, 2.5])
def test_calibrate_reports_sensor_lag(lag):
    # a sensor output sin(wt - lag) is a phase delay of +lag
    sensor, ref = ideal_pair(10, 1000, 20, lag=lag)
    res = calibrate(sensor, ref, 10, ProcessingChain())
    assert res.phase_delay == pytest.approx(lag, abs=1e-9)


def test_calibrate_channel_mismatch():
    sensor, ref = ideal_pair(10, 1000, 20)
    with pytest.raises(ValueError):
        calibrate(sensor, Waveform(ref.samples, 2000, ref.start_time), 10, ProcessingChain())
    with pytest.raises(ValueError, match="mismatch"):
        calibrate(sensor, ref.evolve(samples=ref.samples[:-50]), 10, ProcessingChain())


def test_amplitude_phase_error_equivalence():
    fv, fs, cycles = 1, 100, 20
    w0 = sine(fv, fs, cycles)
    g = SpectrumModel.flat(1e-4)
    mods, args = [], []
    for trial in range(400):
        noise = colored_noise(g, w0.n, fs, seed=11, source=trial, oversample=4).samples
        a = sam_fit(w0.evolve(samples=w0.samples + noise), fv)
        mods.append(a.modulus())
        args.append(a.arg())
    ratio = np.std(args, ddof=1) / np.std(mods, ddof=1)
    assert ratio == pytest.approx(1.0, rel=0.15)


def test_plan_examples():
    p = plan_record_length(49.2, [50], "rect", min_cycles=100, max_T=10)
    assert p.feasible and p.T == Fraction(5, 2) and p.period == Fraction(5, 2)
    p = plan_record_length(49.5, [50], "rect", min_cycles=99)
    assert p.T == 2
    p = plan_record_length(50, [50], "rect", min_cycles=100)
    assert p.T == 2 and p.irreducible == (50,) and p.warnings


def test_plan_infeasible_lists_smallest():
    p = plan_record_length("49.2", ["50"], "rect", max_T=2)
    assert not p.feasible and p.T is None and p.smallest_feasible == Fraction(5, 2)


def test_plan_hann_avoids_first_bin():
    p = plan_record_length(49.6, [50], "hann")
    assert abs(exact(49.6) - 50) * p.T >= 2
    assert plan_record_length(49.6, [50], "rect").T == Fraction(5, 2)
    assert p.T == 5


def test_plan_with_sample_rate():
    p = plan_record_length(1, [], "rect", min_cycles=1, fs="0.4")
    assert p.T == 5


@settings(max_examples=30, deadline=None)
@given(fv=st.sampled_from(["49.2", "49.5", "10", "12.5", "100", "33.3"]),
       lines=st.lists(st.sampled_from(["50", "60", "0.5", "150", "25.2"]), min_size=1, max_size=3, unique=True),
       seed=st.integers(0, 2**32 - 1))
def test_planned_length_nulls_lines(fv, lines, seed):
    fv = exact(fv)
    plan = plan_record_length(fv, lines, "rect", min_cycles=1)
    fs = 400 * fv
    if (plan.T * fs).denominator != 1:
        plan = plan_record_length(fv, lines, "rect", min_cycles=1, fs=fs)
    n = int(plan.T * fs)
    rng = np.random.default_rng(seed)
    carrier = np.sin(phase_angles(n, fv, fs))
    disturbed = carrier.copy()
    for f in lines:
        disturbed += rng.uniform(0, 1) * np.sin(phase_angles(n, exact(f), fs) + rng.uniform(0, 6.3))
    a = complex(sam_fit(Waveform(carrier, fs), fv))
    b = complex(sam_fit(Waveform(disturbed, fs), fv))
    assert abs(a - b) < 1e-9
