"""Repeated synthetic calibrations and their comparison with the predictors."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

import numpy as np

from .core import (
    BUDGET_SOURCES,
    CalibrationScenario,
    LineTone,
    ProcessingChain,
    UncertaintyBudget,
    exact,
    fraction_to_str,
)
from .estimator import _discard_samples, calibrate
from .noise import DEFAULT_SEED, Seed, synth_pair
from .uncertainty import budget

__all__ = [
    "PHASE_MODES",
    "TrialError",
    "TrialStats",
    "SweepPoint",
    "LengthPoint",
    "run_trials",
    "frequency_sweep",
    "length_sweep",
    "write_sweep_csv",
    "write_length_csv",
]

PHASE_MODES = ("random", "sweep")


class TrialError(RuntimeError):
    """A calibration failed inside a Monte Carlo run."""

    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial}: {cause}")
        self.trial = trial
        self.cause = cause


@dataclass(frozen=True)
class TrialStats:
    """Summary of ``trials`` calibrations.

    ``std_S_cal_rel`` is the sample standard deviation (``ddof=1``) of the
    calibrated sensitivity divided by the true sensitivity.
    """

    trials: int
    true_sensitivity: float
    mean_S_cal: float
    std_S_cal_rel: float
    mean_phase: float
    std_phase: float
    records: tuple[tuple[float, float], ...] | None = None

    @property
    def std_error(self) -> float:
        """Standard error of ``std_S_cal_rel`` for Gaussian scatter."""
        return self.std_S_cal_rel / math.sqrt(2 * self.trials)

    @property
    def bias_rel(self) -> float:
        return self.mean_S_cal / self.true_sensitivity - 1.0

    def to_dict(self) -> dict:
        d = {"trials": self.trials, "true_sensitivity": self.true_sensitivity,
             "mean_S_cal": self.mean_S_cal, "std_S_cal_rel": self.std_S_cal_rel,
             "mean_phase": self.mean_phase, "std_phase": self.std_phase}
        if self.records is not None:
            d["records"] = [list(r) for r in self.records]
        return d


def _sweep_scenario(scenario: CalibrationScenario, trial: int, trials: int, seed: int) -> CalibrationScenario:
    """Replace random line phases by evenly spaced ones.

    The first random-phase tone takes ``2*pi*trial/trials``; later tones
    take the same grid under fixed seeded permutations.
    """
    changes = {}
    k = 0
    for name in ("common", "sensor", "reference"):
        tones = []
        for tone in scenario.lines(name):
            if tone.random_phase:
                j = trial if k == 0 else int(Seed(seed, k).rng("phase_sweep").permutation(trials)[trial])
                tone = tone.with_phase(2 * math.pi * j / trials)
                k += 1
            tones.append(tone)
        changes[f"{name}_lines"] = tuple(tones)
        spec = getattr(scenario, f"{name}_random")
        if spec is not None and spec.lines:
            changes[f"{name}_random"] = replace(spec, lines=())
    return scenario.evolve(**changes)


def _settling_cycles(scenario: CalibrationScenario, chain: ProcessingChain) -> int:
    if chain.filter is None:
        return 0
    d = _discard_samples(chain.discard_cycles, scenario.fv, scenario.fs)
    return int(d * scenario.fv / scenario.fs)


def run_trials(scenario: CalibrationScenario, chain: ProcessingChain, trials: int,
               seed: int = DEFAULT_SEED, phase_mode: str = "random",
               keep_records: bool = False) -> TrialStats:
    """Synthesize and calibrate ``trials`` independent pairs.

    With a filter, the settling cycles are synthesized in front of the
    analysis record, so every trial analyses ``scenario.cycles`` cycles.
    ``phase_mode="sweep"`` replaces random line phases by an even grid over
    the trials instead of independent draws.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    if phase_mode not in PHASE_MODES:
        raise ValueError(f"phase_mode must be one of {PHASE_MODES}")
    extra = _settling_cycles(scenario, chain)
    s_cal = np.empty(trials)
    phase = np.empty(trials)
    for j in range(trials):
        scen = _sweep_scenario(scenario, j, trials, seed) if phase_mode == "sweep" else scenario
        try:
            sensor, reference = synth_pair(scen, Seed(seed, j), extra_cycles=extra)
            res = calibrate(sensor, reference, scen.fv, chain)
        except Exception as exc:
            raise TrialError(j, exc) from exc
        s_cal[j] = res.sensitivity
        phase[j] = res.phase_delay
    S = scenario.sensitivity
    records = tuple(zip(s_cal.tolist(), phase.tolist())) if keep_records else None
    return TrialStats(trials, S, float(np.mean(s_cal)), float(np.std(s_cal, ddof=1) / S),
                      float(np.mean(phase)), float(np.std(phase, ddof=1)), records)


@dataclass(frozen=True)
class SweepPoint:
    fv: Fraction
    T: Fraction
    stats: TrialStats
    predicted: UncertaintyBudget


def frequency_sweep(base: CalibrationScenario, chain: ProcessingChain, fv_list: Iterable,
                    trials: int, seed: int = DEFAULT_SEED,
                    phase_mode: str = "random") -> list[SweepPoint]:
    """Run trials at each ``fv``, keeping cycles and samples per cycle fixed.

    A filter in ``chain`` is redesigned around each frequency.
    """
    out = []
    for fv in fv_list:
        scen = base.with_fv(exact(fv))
        ch = chain.retuned(scen.fv, scen.fs)
        stats = run_trials(scen, ch, trials, seed, phase_mode)
        out.append(SweepPoint(scen.fv, scen.record_length, stats, budget(scen, ch)))
    return out


@dataclass(frozen=True)
class LengthPoint:
    T: Fraction
    valid: bool
    std: float
    predicted: float
    reason: str = ""


def length_sweep(fv, tone: LineTone, T_list: Sequence, trials: int = 64, fs=None,
                 seed: int = DEFAULT_SEED, channel: str = "reference") -> list[LengthPoint]:
    """Relative sensitivity scatter from one line versus record length.

    The tone (in the channel's units, metres for the reference) sweeps its
    phase evenly over ``trials`` values on a noise-free unit carrier.  A
    length that is not a whole number of cycles and samples is reported
    invalid with ``std = nan``.
    """
    fv = exact(fv)
    fs = 100 * fv if fs is None else exact(fs)
    if not tone.random_phase:
        tone = replace(tone, phase="random")
    out = []
    for T in T_list:
        T = exact(T)
        cycles, samples = T * fv, T * fs
        if cycles.denominator != 1 or samples.denominator != 1 or cycles < 1:
            why = (f"{float(cycles):.6g} cycles" if cycles.denominator != 1
                   else f"{float(samples):.6g} samples")
            out.append(LengthPoint(T, False, math.nan, math.nan, f"not an integer: {why}"))
            continue
        scen = CalibrationScenario(fv, 1.0, 1.0, int(cycles), fs,
                                   **{f"{channel}_lines": (tone,)})
        chain = ProcessingChain()
        stats = run_trials(scen, chain, trials, seed, "sweep")
        pred = budget(scen, chain).combined_sensitivity_rel
        out.append(LengthPoint(T, True, stats.std_S_cal_rel, pred))
    return out


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return fraction_to_str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_sweep_csv(points: Sequence[SweepPoint], fh: TextIO | None = None) -> str:
    """One row per frequency: empirical and predicted scatter, per-source terms."""
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fv", "T", "trials", "mean_S_cal", "std_S_cal_rel", "std_phase",
                "std_error", "predicted_u_S_rel", "predicted_u_phase"]
               + [f"u_{s}" for s in BUDGET_SOURCES])
    for p in points:
        b = p.predicted
        w.writerow([_fmt(v) for v in (p.fv, p.T, p.stats.trials, p.stats.mean_S_cal,
                                      p.stats.std_S_cal_rel, p.stats.std_phase, p.stats.std_error,
                                      b.combined_sensitivity_rel, b.combined_phase)]
                   + [_fmt(b[s].u_sensitivity_rel) for s in BUDGET_SOURCES])
    return buf.getvalue() if fh is None else ""


def write_length_csv(points: Sequence[LengthPoint], fh: TextIO | None = None) -> str:
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "valid", "std_S_cal_rel", "predicted_u_S_rel", "note"])
    for p in points:
        w.writerow([_fmt(p.T), int(p.valid), _fmt(p.std), _fmt(p.predicted), p.reason])
    return buf.getvalue() if fh is None else ""
