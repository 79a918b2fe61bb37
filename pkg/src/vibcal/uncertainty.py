"""Closed-form uncertainty predictors for amplitude, sensitivity and phase.

A disturbance ``l*sin(2*pi*f*t + phi)`` entering a channel through the
transfer ``H_n`` shifts the fitted amplitude of a carrier that passes
through ``H_c`` by the relative complex error::

    e/c = (l / (A*c*T)) * P * (exp(-i*phi) conj(H_n(f)) W(fv-f)
                                - exp(i*phi) H_n(f) W(fv+f))

with ``P = exp(i*phi0) / conj(H_c(fv))``, ``A`` the carrier amplitude,
``phi0`` its phase at the record start and ``c*T = W(0)``.  The real part
is the modulus error and the imaginary part the phase error.  For a
uniformly distributed ``phi`` their standard deviations are
``|alpha -+ conj(beta)| / sqrt(2)`` with ``alpha``, ``beta`` the two
coefficients.  When the transfers are unity and the carrier starts at zero
phase this is ``|W(fv-f) -+ W(fv+f)|``, the usual pair of leakage terms;
keeping ``conj`` makes the result hold for any transfer.

Random noise is the same expression summed over the synthesis bins with
``l**2/2 = G(f_k)*df``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    BudgetEntry,
    CalibrationScenario,
    LineTone,
    ProcessingChain,
    SpectrumModel,
    UncertaintyBudget,
    exact,
)
from .estimator import _discard_samples
from .filters import FilterSpec
from .noise import OVERSAMPLE, synthesis_grid
from .windows import WindowKind, coherent_gain, window_spectrum

__all__ = [
    "NoiseContext",
    "UNRELIABLE_ABOVE",
    "random_amplitude_u",
    "sensitivity_u_indep_random",
    "sensitivity_u_common_random",
    "line_amplitude_phase_u",
    "sensitivity_u_indep_line",
    "sensitivity_u_common_line",
    "budget",
    "context_for",
]

UNRELIABLE_ABOVE = 0.2


@dataclass(frozen=True)
class NoiseContext:
    """Record and chain parameters shared by all predictors.

    ``grid`` is the number of frequency-grid points noise is synthesized
    on (bin spacing ``fs/grid``); by default ``OVERSAMPLE`` times the record.
    """

    fv: Fraction
    T: Fraction
    N: int
    acceleration_amplitude: float = 1.0
    window: WindowKind = WindowKind.RECTANGULAR
    filter: FilterSpec | None = None
    differentiate: int = 0
    grid: int | None = None
    carrier_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "fv", exact(self.fv))
        object.__setattr__(self, "T", exact(self.T))
        object.__setattr__(self, "window", WindowKind.parse(self.window))
        object.__setattr__(self, "differentiate", int(self.differentiate))
        if self.differentiate not in (0, 1, 2):
            raise ValueError("differentiate must be 0, 1 or 2")
        if (self.T * self.fv).denominator != 1:
            raise ValueError("T*fv must be an integer")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.grid is None:
            object.__setattr__(self, "grid", synthesis_grid(self.N, OVERSAMPLE))
        if self.grid < self.N:
            raise ValueError("grid must be at least N")
        if self.filter is not None and self.filter.fs != self.fs_exact:
            raise ValueError("filter rate does not match N/T")

    @property
    def fs_exact(self) -> Fraction:
        return self.N / self.T

    @property
    def fs(self) -> float:
        return float(self.N / self.T)

    @property
    def displacement_amplitude(self) -> float:
        return self.acceleration_amplitude / (2 * math.pi * float(self.fv)) ** 2

    def bins(self) -> np.ndarray:
        """Positive synthesis frequencies, DC and Nyquist excluded."""
        return np.arange(1, self.grid // 2) * (self.fs / self.grid)

    def filter_gain(self, f):
        if self.filter is None:
            return np.ones(np.shape(f), dtype=complex) if np.ndim(f) else complex(1.0)
        return self.filter.response(f)

    def diff_gain(self, f):
        """Transfer of the reference differentiator (1 when not differentiating)."""
        f = np.asarray(f, dtype=float)
        fs = self.fs
        if self.differentiate == 0:
            return np.ones(f.shape, dtype=complex)
        if self.differentiate == 1:
            return 1j * fs * np.sin(2 * np.pi * f / fs) + 0j
        return -((2 * np.pi * f) ** 2) * np.sinc(f / fs) ** 2 + 0j

    def sensor_gain(self, f):
        """Displacement-to-output transfer of the sensor channel per unit sensitivity."""
        f = np.asarray(f, dtype=float)
        return -((2 * np.pi * f) ** 2) * self.filter_gain(f)

    def reference_gain(self, f):
        return self.diff_gain(f) * self.filter_gain(np.asarray(f, dtype=float))

    def leak_pair(self, f) -> tuple[np.ndarray, np.ndarray]:
        """Normalized window transforms ``W(fv-f)/W(0)`` and ``W(fv+f)/W(0)``."""
        T, fv = float(self.T), float(self.fv)
        w0 = T * coherent_gain(self.window, self.N)
        f = np.asarray(f, dtype=float)
        minus = window_spectrum(self.window, T, self.N, fv - f)
        plus = window_spectrum(self.window, T, self.N, fv + f)
        return np.asarray(minus) / w0, np.asarray(plus) / w0


def _coefficients(ctx: NoiseContext, f, noise_gain, carrier_gain) -> tuple[np.ndarray, np.ndarray]:
    """``alpha`` and ``beta`` per unit of disturbance-to-carrier amplitude ratio."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    hv = complex(np.atleast_1d(carrier_gain(np.array([float(ctx.fv)])))[0])
    p = np.exp(1j * ctx.carrier_phase) / np.conj(hv)
    hn = noise_gain(f)
    wm, wp = ctx.leak_pair(f)
    return p * np.conj(hn) * wm, p * hn * wp


def _spread(alpha, beta) -> tuple[np.ndarray, np.ndarray]:
    """|alpha - conj(beta)| and |alpha + conj(beta)|: modulus and phase leverage."""
    cb = np.conj(beta)
    return np.abs(alpha - cb), np.abs(alpha + cb)


def _random_u(ctx: NoiseContext, model: SpectrumModel | None, terms) -> tuple[float, float]:
    """RSS over bins; ``terms(f)`` returns the (alpha, beta) per unit ratio."""
    if model is None or model.is_zero():
        return 0.0, 0.0
    f = ctx.bins()
    g = model.psd(f) * (ctx.fs / ctx.grid)
    alpha, beta = terms(f)
    amp, ph = _spread(alpha, beta)
    return math.sqrt(math.fsum(g * amp**2)), math.sqrt(math.fsum(g * ph**2))


def random_amplitude_u(ctx: NoiseContext, G: SpectrumModel | None) -> float:
    """Standard uncertainty of the fitted amplitude of a waveform with noise ``G``.

    The filter and window of ``ctx`` apply, differentiation does not.  The
    result is in the units of ``sqrt(G * Hz)``.
    """
    filt = ctx.filter_gain
    u, _ = _random_u(ctx, G, lambda f: _coefficients(ctx, f, filt, filt))
    return u


def sensitivity_u_indep_random(ctx: NoiseContext, Gs: SpectrumModel | None,
                               Gr: SpectrumModel | None, sensitivity: float = 1.0) -> tuple[float, float]:
    """Relative sensitivity and phase uncertainty from independent channel noise.

    ``Gs`` is the sensor output noise (V^2/Hz) and ``Gr`` the reference
    displacement noise (m^2/Hz).
    """
    x0 = ctx.displacement_amplitude
    us = _random_u(ctx, Gs, lambda f: _coefficients(ctx, f, ctx.filter_gain,
                                                     lambda v: sensitivity * ctx.sensor_gain(v)))
    ur = _random_u(ctx, Gr, lambda f: _coefficients(ctx, f, ctx.reference_gain, ctx.reference_gain))
    return (math.hypot(us[0] / x0, ur[0] / x0), math.hypot(us[1] / x0, ur[1] / x0))


def _common_terms(ctx: NoiseContext, f):
    a_s, b_s = _coefficients(ctx, f, ctx.sensor_gain, ctx.sensor_gain)
    a_r, b_r = _coefficients(ctx, f, ctx.reference_gain, ctx.reference_gain)
    return a_s - a_r, b_s - b_r


def sensitivity_u_common_random(ctx: NoiseContext, Gx: SpectrumModel | None) -> tuple[float, float]:
    """Relative sensitivity and phase uncertainty from common displacement noise.

    The sensor sees the true acceleration and the reference the displacement
    (or its numerical derivative), so each bin contributes the mismatch of
    the two channel transfers relative to their values at ``fv``.
    """
    x0 = ctx.displacement_amplitude
    u = _random_u(ctx, Gx, lambda f: _common_terms(ctx, f))
    return u[0] / x0, u[1] / x0


def line_amplitude_phase_u(ctx: NoiseContext, tone: LineTone, *, approximate: bool = False,
                           carrier_amplitude: float | None = None) -> tuple[float, float]:
    """Relative amplitude and phase uncertainty caused by one random-phase line.

    The tone and carrier share the channel transfer of ``ctx`` (filter
    only).  ``carrier_amplitude`` defaults to the displacement amplitude.
    ``approximate`` keeps only the ``W(fv-fl)`` term, which dominates near
    ``fl = fv``.
    """
    a = ctx.displacement_amplitude if carrier_amplitude is None else carrier_amplitude
    if tone.amplitude == 0:
        return 0.0, 0.0
    alpha, beta = _coefficients(ctx, float(tone.frequency), ctx.filter_gain, ctx.filter_gain)
    scale = tone.amplitude / (math.sqrt(2) * a)
    if approximate:
        v = float(np.abs(alpha[0])) * scale
        return v, v
    amp, ph = _spread(alpha, beta)
    return float(amp[0]) * scale, float(ph[0]) * scale


def _line_u(ctx, tone, terms, x0):
    if tone is None or tone.amplitude == 0:
        return 0.0, 0.0
    alpha, beta = terms(float(tone.frequency))
    amp, ph = _spread(alpha, beta)
    scale = tone.amplitude / (math.sqrt(2) * x0)
    return float(amp[0]) * scale, float(ph[0]) * scale


def sensitivity_u_indep_line(ctx: NoiseContext, sensor_tone: LineTone | None,
                             ref_tone: LineTone | None, sensitivity: float = 1.0) -> tuple[float, float]:
    """RSS of a sensor line (V) and a reference line (m) with unrelated phases."""
    x0 = ctx.displacement_amplitude
    us = _line_u(ctx, sensor_tone, lambda f: _coefficients(
        ctx, f, ctx.filter_gain, lambda v: sensitivity * ctx.sensor_gain(v)), x0)
    ur = _line_u(ctx, ref_tone, lambda f: _coefficients(
        ctx, f, ctx.reference_gain, ctx.reference_gain), x0)
    return math.hypot(us[0], ur[0]), math.hypot(us[1], ur[1])


def sensitivity_u_common_line(ctx: NoiseContext, tone: LineTone | None) -> tuple[float, float]:
    """Line in the motion itself, seen by both channels with their own transfers."""
    return _line_u(ctx, tone, lambda f: _common_terms(ctx, f), ctx.displacement_amplitude)


def context_for(scenario: CalibrationScenario, chain: ProcessingChain) -> NoiseContext:
    """Context matching what the Monte Carlo runner synthesizes and analyses.

    The analysis window is always ``scenario.cycles`` cycles; with a filter,
    the settling cycles are synthesized in front of it and discarded.
    """
    n = scenario.n_samples
    extra = 0
    if chain.filter is not None:
        extra = _discard_samples(chain.discard_cycles, scenario.fv, scenario.fs)
    grid = synthesis_grid(n + extra + 2, OVERSAMPLE)
    return NoiseContext(scenario.fv, scenario.record_length, n, scenario.acceleration_amplitude,
                        chain.window, chain.filter, chain.differentiate_reference, grid)


def _rss(pairs) -> tuple[float, float]:
    pairs = list(pairs)
    return (math.sqrt(math.fsum(p[0] ** 2 for p in pairs)),
            math.sqrt(math.fsum(p[1] ** 2 for p in pairs)))


def _entry(source: str, u: tuple[float, float], eliminated_by: str | None = None) -> BudgetEntry:
    return BudgetEntry(source, float(u[0]), float(u[1]), eliminated_by,
                       bool(max(u) > UNRELIABLE_ABOVE))


def _nulled(scenario: CalibrationScenario, tones) -> bool:
    """Every tone sits on a zero of the window transform (and is not at fv)."""
    T = scenario.record_length
    return bool(tones) and all((t.frequency * T).denominator == 1 and t.frequency != scenario.fv
                               for t in tones)


def budget(scenario: CalibrationScenario, chain: ProcessingChain) -> UncertaintyBudget:
    """Per-source predicted uncertainties for ``scenario`` processed by ``chain``.

    ``eliminated_by`` records sources the chain removes: common terms under
    double differentiation, line terms whose frequencies the record length
    nulls.
    """
    ctx = context_for(scenario, chain)
    S = scenario.sensitivity
    diff2 = "differentiation" if chain.differentiate_reference == 2 else None
    entries = [
        _entry("indep_random_sensor", sensitivity_u_indep_random(ctx, scenario.sensor_random, None, S)),
        _entry("indep_random_ref", sensitivity_u_indep_random(ctx, None, scenario.reference_random, S)),
        _entry("common_random", sensitivity_u_common_random(ctx, scenario.common_random),
               diff2 if scenario.common_random is not None else None),
    ]
    for source, channel in (("indep_line_sensor", "sensor"), ("indep_line_ref", "reference")):
        tones = scenario.lines(channel)
        if channel == "sensor":
            u = _rss(sensitivity_u_indep_line(ctx, t, None, S) for t in tones)
        else:
            u = _rss(sensitivity_u_indep_line(ctx, None, t, S) for t in tones)
        entries.append(_entry(source, u, "record-length" if _nulled(scenario, tones) else None))
    tones = scenario.lines("common")
    u = _rss(sensitivity_u_common_line(ctx, t) for t in tones)
    why = diff2 if tones and diff2 else ("record-length" if _nulled(scenario, tones) else None)
    entries.append(_entry("common_line", u, why))
    return UncertaintyBudget(tuple(entries))
