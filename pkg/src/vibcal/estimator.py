"""Sine-approximation amplitude extraction and the calibration pipeline.

The fit at a known frequency ``fv`` over an integer number of cycles is the
single Fourier coefficient::

    b1 + i*b2 = (2/N) * sum_n x_n * exp(2j*pi*fv*t_n)

with ``t_n`` measured from the first sample of the record.  Phases are
therefore relative to the record start.  Kernel angles are reduced with
exact rational arithmetic so that integer-cycle nulls hold to rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .core import (
    CalibrationResult,
    ComplexAmplitude,
    ProcessingChain,
    Waveform,
    exact,
    wrap_phase,
)
from .filters import apply_filter, filter_response
from .windows import WindowKind, window_samples

__all__ = [
    "sam_fit",
    "windowed_fit",
    "second_difference",
    "first_difference",
    "differentiate",
    "diff_correction",
    "trim_to_cycles",
    "process",
    "calibrate",
    "RecordPlan",
    "plan_record_length",
    "phase_angles",
]

CYCLE_TOLERANCE = 1e-9
DIFF_SLACK = 2


def phase_angles(n: int, f, fs, offset: int = 0) -> np.ndarray:
    """``2*pi*f*k/fs`` for ``k = offset .. offset+n-1``, reduced mod ``2*pi``.

    The reduction is done on the exact ratio ``f/fs`` so large ``k`` do not
    lose the fractional part of the cycle count.
    """
    r = exact(f) / exact(fs)
    p, q = r.numerator % r.denominator, r.denominator
    k = np.arange(offset, offset + n, dtype=np.int64)
    if q < 2**31 and (n + abs(offset)) < 2**31:
        frac = ((p * k) % q) / q
    else:
        frac = np.mod(float(r) * k, 1.0)
    return 2.0 * np.pi * frac


def _check_rate(fs: float, fv: float) -> None:
    if fs < 4 * fv:
        raise ValueError(f"sample rate {fs:g} Hz is below 4*fv ({4 * fv:g} Hz)")
    if fs < 20 * fv:
        warnings.warn(f"sample rate {fs:g} Hz is below 20*fv; fit assumes fs >> fv",
                      RuntimeWarning, stacklevel=3)


def _check_cycles(w: Waveform, fv: Fraction) -> None:
    c = w.cycles(fv)
    nearest = round(c)
    if nearest < 1 or abs(c - nearest) > CYCLE_TOLERANCE * c:
        raise ValueError(
            f"record spans {float(c):.9g} cycles of {float(fv):g} Hz, not an integer; "
            "trim it with trim_to_cycles or plan the record length")


def _fit(x: np.ndarray, fv: Fraction, fs: Fraction, weights: np.ndarray | None) -> ComplexAmplitude:
    theta = phase_angles(x.size, fv, fs)
    if weights is None:
        scale = 2.0 / x.size
        y = x
    else:
        scale = 2.0 / math.fsum(weights)
        y = x * weights
    b1 = scale * np.dot(y, np.cos(theta))
    b2 = scale * np.dot(y, np.sin(theta))
    return ComplexAmplitude(float(b1), float(b2))


def sam_fit(w: Waveform, fv) -> ComplexAmplitude:
    """Complex amplitude ``b1 + i*b2`` of ``w`` at ``fv``.

    The record must hold an integer number of cycles (to 1e-9 relative).
    A pure ``a*sin(2*pi*fv*t)`` gives ``(0, a)``.
    """
    fv = exact(fv)
    _check_rate(w.fs, float(fv))
    _check_cycles(w, fv)
    return _fit(w.samples, fv, w.sample_rate, None)


def windowed_fit(w: Waveform, fv, kind: WindowKind | str) -> ComplexAmplitude:
    """Windowed fit normalised by the coherent gain; rectangular is ``sam_fit``."""
    kind = WindowKind.parse(kind)
    if kind is WindowKind.RECTANGULAR:
        return sam_fit(w, fv)
    fv = exact(fv)
    _check_rate(w.fs, float(fv))
    _check_cycles(w, fv)
    return _fit(w.samples, fv, w.sample_rate, window_samples(kind, w.n))


def _derived_unit(unit: str, power: int) -> str:
    if not unit:
        return ""
    return f"{unit}/s" if power == 1 else f"{unit}/s^{power}"


def second_difference(w: Waveform) -> Waveform:
    """``(x[n+1] - 2x[n] + x[n-1]) * fs**2``; drops both end samples."""
    if w.n < 3:
        raise ValueError("second difference needs at least 3 samples")
    x = w.samples
    fs = w.fs
    a = (x[2:] - 2.0 * x[1:-1] + x[:-2]) * (fs * fs)
    return w.evolve(samples=a, start_time=w.start_time + 1.0 / fs,
                    unit=_derived_unit(w.unit, 2))


def first_difference(w: Waveform) -> Waveform:
    """Central difference ``(x[n+1] - x[n-1]) * fs/2``; drops both end samples."""
    if w.n < 3:
        raise ValueError("central difference needs at least 3 samples")
    x = w.samples
    v = (x[2:] - x[:-2]) * (0.5 * w.fs)
    return w.evolve(samples=v, start_time=w.start_time + 1.0 / w.fs,
                    unit=_derived_unit(w.unit, 1))


def differentiate(w: Waveform, count: int) -> Waveform:
    if count == 0:
        return w
    if count == 1:
        return first_difference(w)
    if count == 2:
        return second_difference(w)
    raise ValueError("differentiation count must be 0, 1 or 2")


def diff_correction(fv, fs, count: int = 2) -> float:
    """Gain of the discrete derivative relative to the continuous one at ``fv``.

    ``sinc(fv/fs)**2`` for the second difference, ``sinc(2*fv/fs)`` for
    the central first difference.
    """
    fv, fs = float(fv), float(fs)
    if not 0 < fv < fs / 2:
        raise ValueError("need 0 < fv < fs/2")
    if count == 0:
        return 1.0
    if count == 1:
        return float(np.sinc(2.0 * fv / fs))
    if count == 2:
        return float(np.sinc(fv / fs) ** 2)
    raise ValueError("differentiation count must be 0, 1 or 2")


def trim_to_cycles(w: Waveform, fv, max_trim: int | None = None) -> Waveform:
    """Keep the longest leading integer-cycle part of ``w``.

    ``max_trim`` bounds the number of samples that may be dropped.
    """
    r = exact(fv) / w.sample_rate
    keep = (w.n // r.denominator) * r.denominator
    if keep == 0:
        raise ValueError("record is shorter than one whole-sample cycle block")
    if max_trim is not None and w.n - keep > max_trim:
        raise ValueError(
            f"record needs {w.n - keep} samples trimmed to reach integer cycles "
            f"(at most {max_trim} allowed)")
    return w if keep == w.n else w.evolve(samples=w.samples[:keep])


def _discard_samples(discard_cycles: int, fv: Fraction, fs: Fraction) -> int:
    per_cycle = fs / fv
    # smallest cycle count >= discard_cycles spanning whole samples
    block = per_cycle.denominator
    cycles = -(-discard_cycles // block) * block
    return int(cycles * per_cycle)


def _check_filter(chain: ProcessingChain, fv: Fraction, fs: Fraction) -> None:
    spec = chain.filter
    if spec.fv != fv:
        raise ValueError(f"filter is centred on {spec.fv} Hz, not {fv} Hz")
    if spec.fs != fs:
        raise ValueError(f"filter rate {spec.fs} Hz does not match data rate {fs} Hz")


def _estimate(w: Waveform, fv: Fraction, chain: ProcessingChain, diff_count: int) -> complex:
    """Steps after differentiation: filter, discard, fit, gain corrections."""
    if chain.filter is not None:
        _check_filter(chain, fv, w.sample_rate)
        w = apply_filter(w, chain.filter)
        d = _discard_samples(chain.discard_cycles, fv, w.sample_rate)
        if w.n - d < 2 or w.n - d < w.fs / float(fv):
            raise ValueError(f"fewer than one cycle left after discarding {d} samples")
        w = w.evolve(samples=w.samples[d:], start_time=w.start_time + d / w.fs)
    z = complex(windowed_fit(w, fv, chain.window))
    if chain.filter is not None:
        # a gain F shows up as conj(F) under the exp(+i*2*pi*fv*t) kernel
        z /= filter_response(chain.filter, float(fv)).conjugate()
    if diff_count:
        z /= diff_correction(fv, w.fs, diff_count)
    return z


def process(w: Waveform, fv, chain: ProcessingChain, role: str = "sensor") -> ComplexAmplitude:
    """Run one channel through ``chain`` and return its corrected amplitude.

    Order: differentiate (reference only) and trim to integer cycles, then
    filter and discard settling cycles, windowed fit, divide out the filter
    gain at ``fv`` and the discrete-derivative gain.
    """
    if role not in ("sensor", "reference"):
        raise ValueError("role must be 'sensor' or 'reference'")
    fv = exact(fv)
    k = chain.differentiate_reference if role == "reference" else 0
    if k:
        if "/s" in w.unit:
            raise ValueError(f"reference unit {w.unit!r} is already a derivative")
        w = trim_to_cycles(differentiate(w, k), fv, max_trim=DIFF_SLACK)
    return ComplexAmplitude.from_complex(_estimate(w, fv, chain, k))


def _align(a: Waveform, b: Waveform, fv: Fraction) -> tuple[Waveform, Waveform]:
    fs = a.fs
    shift = (b.start_time - a.start_time) * fs
    if abs(shift - round(shift)) > 1e-6:
        raise ValueError("channels are not sampled on a common time grid")
    shift = int(round(shift))
    ia, ib = max(0, shift), max(0, -shift)
    n = min(a.n - ia, b.n - ib)
    if n <= 0:
        raise ValueError("channels do not overlap in time")
    r = fv / a.sample_rate
    keep = (n // r.denominator) * r.denominator
    if keep == 0 or a.n - ia - keep > DIFF_SLACK or b.n - ib - keep > DIFF_SLACK:
        raise ValueError(
            f"channel mismatch: {a.n - ia} and {b.n - ib} samples after alignment, "
            f"integer-cycle span is {keep}; records must match to within "
            f"{DIFF_SLACK} samples (a differentiated reference needs one extra "
            "sample at each end)")
    a = a.evolve(samples=a.samples[ia:ia + keep], start_time=a.start_time + ia / fs)
    b = b.evolve(samples=b.samples[ib:ib + keep], start_time=b.start_time + ib / fs)
    return a, b


def calibrate(sensor: Waveform, reference: Waveform, fv, chain: ProcessingChain) -> CalibrationResult:
    """Sensitivity modulus and phase delay of an accelerometer.

    With the reference differentiated ``k`` times, the reference amplitude
    is brought to acceleration by ``(2*pi*fv)**(2-k)`` and the phase by
    ``(2-k)*pi/2``; for ``k=0`` this is ``|V|/((2*pi*fv)**2 |x|)`` and
    ``arg V - arg x - pi``.  The same chain (one filter) is applied to both
    channels, so the filter phase cancels.
    """
    fv = exact(fv)
    if sensor.sample_rate != reference.sample_rate:
        raise ValueError(
            f"sample rates differ: sensor {sensor.sample_rate}, reference {reference.sample_rate}")
    k = chain.differentiate_reference
    ref = differentiate(reference, k)
    sensor, ref = _align(sensor, ref, fv)
    v = _estimate(sensor, fv, chain, 0)
    r = _estimate(ref, fv, chain, k)
    omega = 2.0 * math.pi * float(fv)
    s_cal = abs(v) / (omega ** (2 - k) * abs(r))
    dphi = wrap_phase(np.angle(v) - np.angle(r) + (2 - k) * math.pi / 2)
    return CalibrationResult(float(s_cal), float(dphi),
                             ComplexAmplitude.from_complex(v),
                             ComplexAmplitude.from_complex(r))


def _gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.gcd(a.numerator * b.denominator, b.numerator * a.denominator),
                    a.denominator * b.denominator)


@dataclass(frozen=True)
class RecordPlan:
    """Outcome of record-length planning.

    ``period`` is the base length every admissible record is a multiple of;
    ``T`` is ``None`` when no admissible length fits under ``max_T``.
    """

    T: Fraction | None
    smallest_feasible: Fraction
    period: Fraction
    feasible: bool
    irreducible: tuple[Fraction, ...] = ()
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def cycles(self, fv) -> int | None:
        return None if self.T is None else int(self.T * exact(fv))


def plan_record_length(fv, line_freqs: Iterable = (), window: WindowKind | str = WindowKind.RECTANGULAR,
                       min_cycles: int = 1, max_T=None, fs=None) -> RecordPlan:
    """Shortest record that nulls the carrier harmonics and every line.

    The record must make ``fv*T`` and each ``fl*T`` integers, so it is a
    multiple of ``1/gcd(fv, fl, ...)``.  With a Hann window, offsets of one
    bin (``|fv - fl|*T == 1``) are not nulled and the multiple is raised.
    A line at ``fv`` itself cannot be nulled; it is reported in
    ``irreducible``.  Passing ``fs`` also forces a whole number of samples.
    """
    window = WindowKind.parse(window)
    fv = exact(fv)
    if fv <= 0:
        raise ValueError("fv must be positive")
    lines = [exact(f) for f in line_freqs]
    if any(f <= 0 for f in lines):
        raise ValueError("line frequencies must be positive")
    on_freq = tuple(f for f in lines if f == fv)
    others = [f for f in lines if f != fv]
    notes = []
    if on_freq:
        notes.append(f"line at {float(fv):g} Hz coincides with fv and cannot be nulled")
    g = fv
    for f in others:
        g = _gcd(g, f)
    if fs is not None:
        g = _gcd(g, exact(fs))
    period = 1 / g
    t_min = max(Fraction(min_cycles) / fv, period)
    m = -(-t_min // period)
    if window is WindowKind.HANN:
        while any(abs(fv - f) * m * period < 2 for f in others):
            m += 1
    t = m * period
    feasible = max_T is None or t <= exact(max_T)
    if not feasible:
        notes.append(f"no admissible record within {float(exact(max_T)):g} s; "
                     f"shortest is {float(t):g} s")
    return RecordPlan(t if feasible else None, t, period, feasible, on_freq, tuple(notes))
