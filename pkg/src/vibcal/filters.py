"""Butterworth bandpass design, causal application and settling time.

A bandpass of total order ``2m`` is built from the ``m``-th order analog
Butterworth low-pass prototype, shifted to a bandpass centred (geometric
mean) on the prewarped vibration frequency with bandwidth ``centre / Q``,
then mapped by the bilinear transform.  Prewarping at ``fv`` makes the
digital gain at ``fv`` exactly the analog centre gain of 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy import signal

from .core import Waveform, exact, fraction_to_str

__all__ = [
    "FilterSpec",
    "NotSettledError",
    "design_bandpass",
    "apply_filter",
    "filter_response",
    "settling_time_cycles",
]

SUPPORTED_ORDERS = (2, 4, 6, 8)


class NotSettledError(RuntimeError):
    """The filter output did not settle within the allowed number of cycles."""

    def __init__(self, max_cycles: int, tolerance: float):
        super().__init__(f"not settled within {max_cycles} cycles at tolerance {tolerance:g}")
        self.max_cycles = max_cycles
        self.tolerance = tolerance


@dataclass(frozen=True)
class FilterSpec:
    """Bandpass recipe; second-order-section coefficients are derived on demand."""

    order: int
    q: float
    fv: Fraction
    fs: Fraction
    family: str = "butterworth-bandpass"

    def __post_init__(self):
        object.__setattr__(self, "fv", exact(self.fv))
        object.__setattr__(self, "fs", exact(self.fs))
        object.__setattr__(self, "q", float(self.q))
        if self.family != "butterworth-bandpass":
            raise ValueError(f"unsupported filter family {self.family!r}")
        if int(self.order) != self.order or self.order % 2:
            raise ValueError(f"filter order must be even, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        if self.order not in SUPPORTED_ORDERS:
            raise ValueError(f"filter order must be one of {SUPPORTED_ORDERS}")
        if not self.q > 0:
            raise ValueError("Q must be positive")
        fv, fs = float(self.fv), float(self.fs)
        if fv <= 0:
            raise ValueError("centre frequency must be positive")
        if fv / fs < 1e-5:
            raise ValueError("fv/fs below 1e-5: section coefficients would be ill-conditioned")
        if fs < 20 * fv:
            raise ValueError("fs must be >= 20*fv")
        lo, hi = self.nominal_edges
        if not (0 < lo and hi < fs / 2):
            raise ValueError(f"band edges ({lo:g}, {hi:g}) Hz not inside (0, fs/2)")

    @property
    def nominal_edges(self) -> tuple[float, float]:
        """``fv*(1 -+ 1/(2Q))``, the arithmetic band around the centre."""
        fv = float(self.fv)
        return fv * (1 - 0.5 / self.q), fv * (1 + 0.5 / self.q)

    @property
    def design_edges(self) -> tuple[float, float]:
        """Digital -3 dB frequencies of the designed filter (Hz)."""
        fs = float(self.fs)
        w0 = 2 * fs * math.tan(math.pi * float(self.fv) / fs)
        bw = w0 / self.q
        lo = -bw / 2 + math.sqrt(bw * bw / 4 + w0 * w0)
        hi = bw / 2 + math.sqrt(bw * bw / 4 + w0 * w0)
        return tuple(fs / math.pi * math.atan(w / (2 * fs)) for w in (lo, hi))

    @cached_property
    def sos(self) -> np.ndarray:
        fs = float(self.fs)
        w0 = 2 * fs * math.tan(math.pi * float(self.fv) / fs)
        z, p, k = signal.buttap(self.order // 2)
        z, p, k = signal.lp2bp_zpk(z, p, k, wo=w0, bw=w0 / self.q)
        z, p, k = signal.bilinear_zpk(z, p, k, fs=fs)
        sos = signal.zpk2sos(z, p, k)
        gain = abs(_sos_response(sos, np.array([float(self.fv) / fs]))[0])
        sos[0, :3] /= gain
        sos.setflags(write=False)
        return sos

    def response(self, f):
        return filter_response(self, f)

    def pole_radii(self) -> np.ndarray:
        out = []
        for sec in self.sos:
            out.extend(np.abs(np.roots(sec[3:])))
        return np.array(out)

    def to_dict(self) -> dict:
        return {"family": self.family, "order": self.order, "q": self.q,
                "fv": fraction_to_str(self.fv), "fs": fraction_to_str(self.fs)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FilterSpec":
        return cls(int(d["order"]), float(d["q"]), exact(d["fv"]), exact(d["fs"]),
                   d.get("family", "butterworth-bandpass"))


def design_bandpass(order: int, q: float, fv, fs) -> FilterSpec:
    """Design a Butterworth bandpass of total ``order`` centred on ``fv``.

    Raises ``ValueError`` for odd or unsupported orders, band edges outside
    ``(0, fs/2)``, ``fs < 20*fv`` or ``fv/fs < 1e-5``.
    """
    spec = FilterSpec(order, q, fv, fs)
    spec.sos  # noqa: B018 - build coefficients eagerly so design errors surface here
    return spec


def _sos_response(sos: np.ndarray, f_norm: np.ndarray) -> np.ndarray:
    zi = np.exp(-2j * np.pi * f_norm)  # z^-1
    h = np.ones_like(zi)
    for b0, b1, b2, a0, a1, a2 in sos:
        h = h * (b0 + b1 * zi + b2 * zi * zi) / (a0 + a1 * zi + a2 * zi * zi)
    return h


def filter_response(spec: FilterSpec, f):
    """Complex gain of the section cascade at ``f`` Hz (``0 <= f < fs/2``)."""
    scalar = np.ndim(f) == 0
    f = np.atleast_1d(np.asarray(f, dtype=float))
    fs = float(spec.fs)
    if np.any(f < 0) or np.any(f >= fs / 2):
        raise ValueError("response frequency must satisfy 0 <= f < fs/2")
    h = _sos_response(spec.sos, f / fs)
    return complex(h[0]) if scalar else h


def apply_filter(w: Waveform, spec: FilterSpec) -> Waveform:
    """Causal one-pass filtering from zero initial state; length preserved."""
    if w.sample_rate != spec.fs:
        raise ValueError(f"sample rate {w.sample_rate} does not match filter rate {spec.fs}")
    return w.evolve(samples=signal.sosfilt(np.array(spec.sos), w.samples))


def settling_time_cycles(spec: FilterSpec, fv=None, tolerance: float = 1e-3,
                         max_cycles: int = 400) -> float:
    """Cycles until a unit sine at ``fv`` switched on at t=0 stays settled.

    The amplitude is tracked with a one-cycle sine fit slid sample by
    sample; the result is the earliest window start (in cycles) from which
    every later window amplitude is within ``tolerance`` of the steady
    amplitude ``|F(fv)|``.  Requires an integer number of samples per cycle.
    """
    fv = spec.fv if fv is None else exact(fv)
    if fv != spec.fv:
        raise ValueError("settling is measured at the filter centre frequency")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    per_cycle = spec.fs / fv
    if per_cycle.denominator != 1:
        raise ValueError("fs/fv must be an integer number of samples per cycle")
    p = int(per_cycle)
    n = (max_cycles + 1) * p
    k = np.arange(n)
    phase = 2 * np.pi * (k % p) / p
    y = signal.sosfilt(np.array(spec.sos), np.sin(phase))
    # sliding one-cycle Fourier coefficient via cumulative sums
    c = np.concatenate(([0.0], np.cumsum(y * np.exp(1j * phase))))
    amp = np.abs(c[p:] - c[:-p]) * 2.0 / p
    steady = abs(filter_response(spec, float(fv)))
    bad = np.nonzero(np.abs(amp / steady - 1.0) > tolerance)[0]
    if bad.size == 0:
        return 0.0
    start = bad[-1] + 1
    if start > max_cycles * p - p:
        raise NotSettledError(max_cycles, tolerance)
    return start / p
