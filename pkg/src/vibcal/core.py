"""Domain types shared across the toolkit.

All types are immutable value objects.  Frequencies that take part in
cycle-count or common-divisor arithmetic (vibration frequency, sample rate,
line frequencies) are held as :class:`fractions.Fraction` so that decimal
inputs such as ``49.2`` stay exact.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Iterable, Mapping

import numpy as np

from .windows import WindowKind

if TYPE_CHECKING:
    from .filters import FilterSpec

__all__ = [
    "RANDOM_PHASE",
    "exact",
    "fraction_to_str",
    "wrap_phase",
    "Waveform",
    "ComplexAmplitude",
    "LineTone",
    "SpectrumModel",
    "ProcessingChain",
    "CalibrationScenario",
    "CalibrationResult",
    "BudgetEntry",
    "UncertaintyBudget",
    "BUDGET_SOURCES",
]

RANDOM_PHASE = "random"

TWO_PI = 2.0 * math.pi


def exact(value: Any) -> Fraction:
    """Convert a frequency-like value to an exact rational.

    Floats are read through their shortest decimal representation, so
    ``exact(49.2) == Fraction(246, 5)``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a frequency")
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, numbers.Real):
        v = float(value)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(v))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise ValueError(f"not an exact decimal or ratio: {value!r}") from None
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


def fraction_to_str(value: Fraction) -> str:
    """Render a Fraction as a terminating decimal when possible, else ``p/q``."""
    value = Fraction(value)
    q = value.denominator
    twos = fives = 0
    while q % 2 == 0:
        q //= 2
        twos += 1
    while q % 5 == 0:
        q //= 5
        fives += 1
    if q != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = value * 10**digits
    assert scaled.denominator == 1
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    sign = "-" if value < 0 else ""
    if digits == 0:
        return sign + s
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def wrap_phase(phi: float) -> float:
    """Wrap an angle to ``(-pi, pi]``."""
    r = math.remainder(float(phi), TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real time series.

    ``samples[n]`` is taken at ``start_time + n / sample_rate``.  Extra CSV
    header keys are kept in ``meta``.
    """

    samples: np.ndarray
    sample_rate: Fraction
    start_time: float = 0.0
    unit: str = ""
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.samples, dtype=float, copy=True).reshape(-1)
        if x.size == 0:
            raise ValueError("waveform has no samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform samples must be finite")
        x.setflags(write=False)
        fs = exact(self.sample_rate)
        if fs <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", fs)
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return (self.sample_rate == other.sample_rate
                and self.start_time == other.start_time
                and self.unit == other.unit
                and np.array_equal(self.samples, other.samples))

    __hash__ = None

    @property
    def fs(self) -> float:
        return float(self.sample_rate)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return float(self.n / self.sample_rate)

    def cycles(self, fv) -> Fraction:
        """Exact number of vibration cycles spanned by the record."""
        return self.n * exact(fv) / self.sample_rate

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.n) / self.fs

    def evolve(self, samples=None, **changes) -> "Waveform":
        if samples is not None:
            changes["samples"] = samples
        return replace(self, **changes)


@dataclass(frozen=True)
class ComplexAmplitude:
    """Estimated complex amplitude ``re + i*im`` (the b1, b2 fit pair)."""

    re: float
    im: float

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexAmplitude":
        z = complex(z)
        return cls(z.real, z.imag)

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def modulus(self) -> float:
        return math.hypot(self.re, self.im)

    def arg(self) -> float:
        a = math.atan2(self.im, self.re)
        return math.pi if a == -math.pi else a

    def to_dict(self) -> dict:
        return {"re": self.re, "im": self.im}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ComplexAmplitude":
        return cls(float(d["re"]), float(d["im"]))


@dataclass(frozen=True)
class LineTone:
    """Line disturbance ``amplitude * sin(2*pi*frequency*t + phase)``.

    ``phase`` may be the string ``"random"``, meaning a fresh uniform
    draw on ``[0, 2*pi)`` for each realization.
    """

    amplitude: float
    frequency: Fraction
    phase: float | str = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frequency", exact(self.frequency))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        if isinstance(self.phase, str):
            if self.phase != RANDOM_PHASE:
                raise ValueError(f"phase must be a number or {RANDOM_PHASE!r}")
        else:
            object.__setattr__(self, "phase", float(self.phase))
        if self.amplitude < 0:
            raise ValueError("line amplitude must be >= 0")
        if self.frequency <= 0:
            raise ValueError("line frequency must be > 0")

    @property
    def random_phase(self) -> bool:
        return self.phase == RANDOM_PHASE

    def with_phase(self, phase: float) -> "LineTone":
        return replace(self, phase=float(phase))

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude,
                "frequency": fraction_to_str(self.frequency),
                "phase": self.phase}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LineTone":
        return cls(d["amplitude"], d["frequency"], d.get("phase", 0.0))


@dataclass(frozen=True)
class SpectrumModel:
    """One-sided PSD table interpolated linearly in (log f, log G).

    Segments touching a zero entry are interpolated linearly in (log f, G).
    Outside the table the nearest end value is used.
    """

    psd_points: tuple[tuple[float, float], ...]
    lines: tuple[LineTone, ...] = ()

    def __post_init__(self):
        pts = tuple((float(f), float(g)) for f, g in self.psd_points)
        if not pts:
            raise ValueError("PSD table is empty")
        fk = [p[0] for p in pts]
        if any(f <= 0 for f in fk):
            raise ValueError("PSD frequencies must be > 0")
        if any(b <= a for a, b in zip(fk, fk[1:])):
            raise ValueError("PSD frequencies must be strictly ascending")
        if any(g < 0 or not math.isfinite(g) for _, g in pts):
            raise ValueError("PSD values must be finite and >= 0")
        object.__setattr__(self, "psd_points", pts)
        object.__setattr__(self, "lines", tuple(self.lines))

    @classmethod
    def flat(cls, level: float, lines: Iterable[LineTone] = ()) -> "SpectrumModel":
        return cls(((1.0, level),), tuple(lines))

    def psd(self, f):
        """Evaluate G at ``f`` (scalar or array)."""
        scalar = np.ndim(f) == 0
        f = np.atleast_1d(np.asarray(f, dtype=float))
        fk = np.array([p[0] for p in self.psd_points])
        gk = np.array([p[1] for p in self.psd_points])
        out = np.empty_like(f)
        lo = f <= fk[0]
        hi = f >= fk[-1]
        out[lo] = gk[0]
        out[hi] = gk[-1]
        mid = ~(lo | hi)
        if np.any(mid):
            fm = f[mid]
            i = np.searchsorted(fk, fm, side="right") - 1
            lf = np.log(fk)
            u = (np.log(fm) - lf[i]) / (lf[i + 1] - lf[i])
            g0, g1 = gk[i], gk[i + 1]
            positive = (g0 > 0) & (g1 > 0)
            with np.errstate(divide="ignore"):
                lg0 = np.log(np.where(positive, g0, 1.0))
                lg1 = np.log(np.where(positive, g1, 1.0))
            val = np.where(positive, np.exp(lg0 + u * (lg1 - lg0)), g0 + u * (g1 - g0))
            val = np.where(fm == fk[i], g0, val)
            out[mid] = val
        return float(out[0]) if scalar else out

    def scaled(self, factor: float) -> "SpectrumModel":
        return replace(self, psd_points=tuple((f, g * factor) for f, g in self.psd_points))

    def is_zero(self) -> bool:
        return all(g == 0 for _, g in self.psd_points)

    def to_dict(self) -> dict:
        return {"psd": [[f, g] for f, g in self.psd_points],
                "lines": [t.to_dict() for t in self.lines]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SpectrumModel":
        return cls(tuple((f, g) for f, g in d["psd"]),
                   tuple(LineTone.from_dict(t) for t in d.get("lines", ())))


@dataclass(frozen=True)
class ProcessingChain:
    """Declarative signal-processing recipe applied before amplitude fitting.

    ``differentiate_reference`` numerically differentiates the reference
    displacement 0, 1 or 2 times; ``discard_cycles`` vibration cycles are
    dropped after the filter (only meaningful with a filter).
    """

    window: WindowKind = WindowKind.RECTANGULAR
    filter: "FilterSpec | None" = None
    differentiate_reference: int = 0
    discard_cycles: int = 0

    def __post_init__(self):
        object.__setattr__(self, "window", WindowKind.parse(self.window))
        if self.differentiate_reference not in (0, 1, 2):
            raise ValueError("differentiate_reference must be 0, 1 or 2")
        if int(self.discard_cycles) != self.discard_cycles or self.discard_cycles < 0:
            raise ValueError("discard_cycles must be a nonnegative integer")
        object.__setattr__(self, "discard_cycles", int(self.discard_cycles))
        if self.filter is None and self.discard_cycles:
            raise ValueError("discard_cycles must be 0 without a filter")

    @classmethod
    def filtered(cls, spec: "FilterSpec", *, window=WindowKind.RECTANGULAR,
                 differentiate_reference: int = 0,
                 discard_cycles: int | None = None,
                 tolerance: float = 1e-3) -> "ProcessingChain":
        """Chain with a filter; ``discard_cycles=None`` discards ``ceil(settling)``."""
        if discard_cycles is None:
            from .filters import settling_time_cycles

            discard_cycles = math.ceil(settling_time_cycles(spec, tolerance=tolerance) - 1e-9)
        return cls(window, spec, differentiate_reference, discard_cycles)

    def retuned(self, fv, fs) -> "ProcessingChain":
        """Same recipe with the filter re-centred on ``fv`` at rate ``fs``."""
        if self.filter is None:
            return self
        from .filters import design_bandpass

        spec = design_bandpass(self.filter.order, self.filter.q, fv, fs)
        return replace(self, filter=spec)

    def describe(self) -> str:
        parts = [self.window.value]
        if self.filter is not None:
            parts.append(f"bpf{self.filter.order}/Q{self.filter.q:g}"
                         f"(discard {self.discard_cycles})")
        if self.differentiate_reference:
            parts.append(f"diff{self.differentiate_reference}")
        return "+".join(parts)

    def to_dict(self) -> dict:
        return {"window": self.window.value,
                "filter": None if self.filter is None else self.filter.to_dict(),
                "differentiate_reference": self.differentiate_reference,
                "discard_cycles": self.discard_cycles}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProcessingChain":
        spec = None
        if d.get("filter") is not None:
            from .filters import FilterSpec

            spec = FilterSpec.from_dict(d["filter"])
        return cls(d.get("window", "rect"), spec,
                   int(d.get("differentiate_reference", 0)),
                   int(d.get("discard_cycles", 0)))


def _spectrum_or_none(d) -> SpectrumModel | None:
    return None if d is None else SpectrumModel.from_dict(d)


@dataclass(frozen=True)
class CalibrationScenario:
    """Synthetic calibration set-up: carrier, sensor and noise sources.

    The reference channel measures displacement (m); the sensor outputs
    volts with sensitivity ``sensitivity`` V/(m/s^2).  Random spectra:
    ``common_random`` and ``reference_random`` in m^2/Hz,
    ``sensor_random`` in V^2/Hz.  Line amplitudes are in m for common and
    reference lines, V for sensor lines.
    """

    fv: Fraction
    acceleration_amplitude: float
    sensitivity: float
    cycles: int
    fs: Fraction
    common_random: SpectrumModel | None = None
    sensor_random: SpectrumModel | None = None
    reference_random: SpectrumModel | None = None
    common_lines: tuple[LineTone, ...] = ()
    sensor_lines: tuple[LineTone, ...] = ()
    reference_lines: tuple[LineTone, ...] = ()

    def __post_init__(self):
        fv, fs = exact(self.fv), exact(self.fs)
        object.__setattr__(self, "fv", fv)
        object.__setattr__(self, "fs", fs)
        object.__setattr__(self, "acceleration_amplitude", float(self.acceleration_amplitude))
        object.__setattr__(self, "sensitivity", float(self.sensitivity))
        for name in ("common_lines", "sensor_lines", "reference_lines"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if fv <= 0:
            raise ValueError("fv must be positive")
        if fs < 100 * fv:
            raise ValueError(f"fs must be >= 100*fv (fs={fs}, fv={fv})")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError("cycles must be a positive integer")
        object.__setattr__(self, "cycles", int(self.cycles))
        if (self.cycles * fs / fv).denominator != 1:
            raise ValueError("cycles*fs/fv must be an integer sample count")
        if self.sensitivity <= 0 or self.acceleration_amplitude <= 0:
            raise ValueError("sensitivity and amplitude must be positive")
        for tone in self.all_lines():
            if tone.frequency >= fs / 2:
                raise ValueError("line frequency must be below Nyquist")

    @property
    def displacement_amplitude(self) -> float:
        return self.acceleration_amplitude / (TWO_PI * float(self.fv)) ** 2

    @property
    def record_length(self) -> Fraction:
        return self.cycles / self.fv

    @property
    def n_samples(self) -> int:
        return int(self.cycles * self.fs / self.fv)

    def samples_for_cycles(self, cycles: int) -> int:
        n = cycles * self.fs / self.fv
        if n.denominator != 1:
            raise ValueError(f"{cycles} cycles is not a whole number of samples")
        return int(n)

    def all_lines(self) -> tuple[LineTone, ...]:
        return self.lines("common") + self.lines("sensor") + self.lines("reference")

    def lines(self, channel: str) -> tuple[LineTone, ...]:
        """Line tones of a channel, including those attached to its spectrum."""
        own = getattr(self, f"{channel}_lines")
        spec = getattr(self, f"{channel}_random")
        return tuple(own) + (tuple(spec.lines) if spec is not None else ())

    def with_fv(self, fv) -> "CalibrationScenario":
        """Move the carrier to ``fv`` keeping cycles and samples per cycle."""
        fv = exact(fv)
        return replace(self, fv=fv, fs=self.fs / self.fv * fv)

    def evolve(self, **changes) -> "CalibrationScenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        def spec(s):
            return None if s is None else s.to_dict()

        return {
            "fv": fraction_to_str(self.fv),
            "acceleration_amplitude": self.acceleration_amplitude,
            "sensitivity": self.sensitivity,
            "cycles": self.cycles,
            "fs": fraction_to_str(self.fs),
            "common_random": spec(self.common_random),
            "sensor_random": spec(self.sensor_random),
            "reference_random": spec(self.reference_random),
            "common_lines": [t.to_dict() for t in self.common_lines],
            "sensor_lines": [t.to_dict() for t in self.sensor_lines],
            "reference_lines": [t.to_dict() for t in self.reference_lines],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CalibrationScenario":
        def tones(key):
            return tuple(LineTone.from_dict(t) for t in d.get(key, ()) or ())

        return cls(
            fv=exact(d["fv"]),
            acceleration_amplitude=d["acceleration_amplitude"],
            sensitivity=d["sensitivity"],
            cycles=d["cycles"],
            fs=exact(d["fs"]),
            common_random=_spectrum_or_none(d.get("common_random")),
            sensor_random=_spectrum_or_none(d.get("sensor_random")),
            reference_random=_spectrum_or_none(d.get("reference_random")),
            common_lines=tones("common_lines"),
            sensor_lines=tones("sensor_lines"),
            reference_lines=tones("reference_lines"),
        )


@dataclass(frozen=True)
class CalibrationResult:
    sensitivity: float
    phase_delay: float
    sensor_amplitude: ComplexAmplitude
    reference_amplitude: ComplexAmplitude

    def to_dict(self) -> dict:
        return {"sensitivity": self.sensitivity,
                "phase_delay": self.phase_delay,
                "sensor_amplitude": self.sensor_amplitude.to_dict(),
                "reference_amplitude": self.reference_amplitude.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CalibrationResult":
        return cls(float(d["sensitivity"]), float(d["phase_delay"]),
                   ComplexAmplitude.from_dict(d["sensor_amplitude"]),
                   ComplexAmplitude.from_dict(d["reference_amplitude"]))


BUDGET_SOURCES = (
    "indep_random_sensor",
    "indep_random_ref",
    "common_random",
    "indep_line_sensor",
    "indep_line_ref",
    "common_line",
)


@dataclass(frozen=True)
class BudgetEntry:
    source: str
    u_sensitivity_rel: float
    u_phase: float
    eliminated_by: str | None = None
    unreliable: bool = False

    def to_dict(self) -> dict:
        return {"source": self.source,
                "u_sensitivity_rel": self.u_sensitivity_rel,
                "u_phase": self.u_phase,
                "eliminated_by": self.eliminated_by,
                "unreliable": self.unreliable}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BudgetEntry":
        return cls(d["source"], float(d["u_sensitivity_rel"]), float(d["u_phase"]),
                   d.get("eliminated_by"), bool(d.get("unreliable", False)))


@dataclass(frozen=True)
class UncertaintyBudget:
    """Per-source standard uncertainties, combined by root-sum-square."""

    entries: tuple[BudgetEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def combined_sensitivity_rel(self) -> float:
        return math.sqrt(math.fsum(e.u_sensitivity_rel**2 for e in self.entries))

    @property
    def combined_phase(self) -> float:
        return math.sqrt(math.fsum(e.u_phase**2 for e in self.entries))

    def __getitem__(self, source: str) -> BudgetEntry:
        for e in self.entries:
            if e.source == source:
                return e
        raise KeyError(source)

    def to_dict(self) -> dict:
        return {"units": {"u_sensitivity_rel": "1", "u_phase": "rad"},
                "entries": [e.to_dict() for e in self.entries],
                "combined": {"u_sensitivity_rel": self.combined_sensitivity_rel,
                             "u_phase": self.combined_phase}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "UncertaintyBudget":
        return cls(tuple(BudgetEntry.from_dict(e) for e in d["entries"]))

