"""Seeded synthesis of sensor/reference waveform pairs.

Random noise is built in the frequency domain: independent complex
Gaussian bins shaped by the PSD, inverse transformed.  Noise for a pair is
drawn on a grid ``OVERSAMPLE`` times longer than the record and cropped, so
it is not periodic over the analysis window and leaks into the fit exactly
as continuous noise would.  The uncertainty predictors sum over the same
grid, which makes prediction and simulation agree in expectation.

Channel layout: the reference carries two extra samples and starts one
sample early (``t0 = -1/fs``) so it can be differentiated and still cover
the sensor record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import CalibrationScenario, LineTone, SpectrumModel, Waveform, exact
from .estimator import phase_angles

__all__ = [
    "DEFAULT_SEED",
    "OVERSAMPLE",
    "SOURCE_IDS",
    "Seed",
    "colored_noise",
    "line_tone",
    "synth_pair",
    "synthesis_grid",
    "pair_lengths",
]

DEFAULT_SEED = 20240917
OVERSAMPLE = 8

SOURCE_IDS: Mapping[str, int] = {
    "common_random": 1,
    "sensor_random": 2,
    "reference_random": 3,
    "common_lines": 4,
    "sensor_lines": 5,
    "reference_lines": 6,
    "phase_sweep": 7,
}


@dataclass(frozen=True)
class Seed:
    """Root seed plus trial index; each noise source gets its own substream."""

    value: int = DEFAULT_SEED
    trial: int = 0

    def __post_init__(self):
        if not 0 <= int(self.value) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.trial) < 0:
            raise ValueError("trial index must be >= 0")
        object.__setattr__(self, "value", int(self.value))
        object.__setattr__(self, "trial", int(self.trial))

    def rng(self, source: str | int) -> np.random.Generator:
        sid = SOURCE_IDS[source] if isinstance(source, str) else int(source)
        return np.random.default_rng(np.random.SeedSequence(self.value, spawn_key=(sid, self.trial)))


def _as_seed(seed) -> Seed:
    return seed if isinstance(seed, Seed) else Seed(seed)


def synthesis_grid(n_samples: int, oversample: int = OVERSAMPLE) -> int:
    """Even grid length used to synthesize ``n_samples`` of noise."""
    grid = int(oversample) * int(n_samples)
    return grid + (grid % 2)


def pair_lengths(scenario: CalibrationScenario, extra_cycles: int = 0) -> tuple[int, int]:
    """Sample counts ``(sensor, reference)`` for a record of ``cycles + extra_cycles``."""
    n = scenario.samples_for_cycles(scenario.cycles + extra_cycles)
    return n, n + 2


def _bin_spectrum(model: SpectrumModel, grid: int, fs: float, rng: np.random.Generator):
    """Frequencies and random half-spectrum with ``E|X_k|^2 = G(f_k)*fs*grid/2``."""
    k = np.arange(grid // 2 + 1)
    f = k * (fs / grid)
    g = np.zeros(k.size)
    g[1:-1] = model.psd(f[1:-1])
    z = rng.standard_normal((2, k.size))
    x = np.sqrt(g * fs * grid / 4.0) * (z[0] + 1j * z[1])
    x[0] = x[-1] = 0.0
    return f, x


def colored_noise(model: SpectrumModel, n: int, fs, seed=DEFAULT_SEED, *,
                  source: str | int = 0, oversample: int = 1, unit: str = "") -> Waveform:
    """Gaussian noise with one-sided PSD ``model.psd``.

    With ``oversample=1`` the series is periodic over its own length.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    fs_val = float(exact(fs))
    grid = synthesis_grid(n, oversample)
    _, x = _bin_spectrum(model, grid, fs_val, _as_seed(seed).rng(source))
    return Waveform(np.fft.irfft(x, grid)[:n], exact(fs), 0.0, unit)


def line_tone(tone: LineTone, n: int, fs, phase_draw: float | None = None,
              start_index: int = 0, unit: str = "") -> Waveform:
    """Samples of ``amplitude*sin(2*pi*f*t + phase)`` at ``t = k/fs``.

    The first sample is at ``k = start_index``.  A tone with random phase
    needs ``phase_draw``.
    """
    fs = exact(fs)
    if tone.frequency >= fs / 2:
        raise ValueError("line frequency must be below Nyquist")
    if tone.random_phase:
        if phase_draw is None:
            raise ValueError("tone has random phase; supply phase_draw")
        phase = float(phase_draw)
    else:
        phase = tone.phase
    theta = phase_angles(n, tone.frequency, fs, offset=start_index)
    return Waveform(tone.amplitude * np.sin(theta + phase), fs, start_index / float(fs), unit)


def _tone_phases(tones, rng) -> list[float]:
    # one draw per tone, even fixed-phase ones, so realizations don't shift
    draws = rng.uniform(0.0, 2 * math.pi, size=len(tones))
    return [float(d) if t.random_phase else t.phase for t, d in zip(tones, draws)]


def synth_pair(scenario: CalibrationScenario, seed=DEFAULT_SEED, trial: int | None = None,
               extra_cycles: int = 0) -> tuple[Waveform, Waveform]:
    """Sensor (V) and reference displacement (m) waveforms for one trial.

    The sensor holds ``cycles + extra_cycles`` cycles from ``t=0``; the
    reference holds two more samples from ``t=-1/fs``.  Common disturbances
    reach the sensor as exact acceleration (tones analytically, random noise
    bin-wise times ``-(2*pi*f)**2``) scaled by the sensitivity.
    """
    seed = _as_seed(seed)
    if trial is not None:
        seed = Seed(seed.value, trial)
    fs = scenario.fs
    fs_val = float(fs)
    n_s, n_r = pair_lengths(scenario, extra_cycles)
    S = scenario.sensitivity
    x0 = scenario.displacement_amplitude

    theta_r = phase_angles(n_r, scenario.fv, fs, offset=-1)
    ref = x0 * np.sin(theta_r)
    sens = -S * scenario.acceleration_amplitude * np.sin(theta_r[1:-1])

    grid = synthesis_grid(n_r)
    if scenario.common_random is not None and not scenario.common_random.is_zero():
        f, x = _bin_spectrum(scenario.common_random, grid, fs_val, seed.rng("common_random"))
        ref = ref + np.fft.irfft(x, grid)[:n_r]
        acc = np.fft.irfft(x * -(2 * np.pi * f) ** 2, grid)[:n_r]
        sens = sens + S * acc[1:-1]
    if scenario.reference_random is not None and not scenario.reference_random.is_zero():
        _, x = _bin_spectrum(scenario.reference_random, grid, fs_val, seed.rng("reference_random"))
        ref = ref + np.fft.irfft(x, grid)[:n_r]
    if scenario.sensor_random is not None and not scenario.sensor_random.is_zero():
        _, x = _bin_spectrum(scenario.sensor_random, grid, fs_val, seed.rng("sensor_random"))
        sens = sens + np.fft.irfft(x, grid)[:n_s]

    tones = scenario.lines("common")
    for tone, ph in zip(tones, _tone_phases(tones, seed.rng("common_lines"))):
        theta = phase_angles(n_r, tone.frequency, fs, offset=-1) + ph
        ref = ref + tone.amplitude * np.sin(theta)
        accel = -(2 * math.pi * float(tone.frequency)) ** 2 * tone.amplitude
        sens = sens + S * accel * np.sin(theta[1:-1])
    tones = scenario.lines("reference")
    for tone, ph in zip(tones, _tone_phases(tones, seed.rng("reference_lines"))):
        ref = ref + line_tone(tone, n_r, fs, ph, start_index=-1).samples
    tones = scenario.lines("sensor")
    for tone, ph in zip(tones, _tone_phases(tones, seed.rng("sensor_lines"))):
        sens = sens + line_tone(tone, n_s, fs, ph).samples

    sensor = Waveform(sens, fs, 0.0, "V")
    reference = Waveform(ref, fs, -1.0 / fs_val, "m")
    return sensor, reference
