"""Sine-approximation amplitude estimation, leakage-based uncertainty
prediction and Monte Carlo validation for vibration calibration."""

from .core import (
    BUDGET_SOURCES,
    BudgetEntry,
    CalibrationResult,
    CalibrationScenario,
    ComplexAmplitude,
    LineTone,
    ProcessingChain,
    SpectrumModel,
    UncertaintyBudget,
    Waveform,
)
from .estimator import (
    RecordPlan,
    calibrate,
    diff_correction,
    plan_record_length,
    process,
    sam_fit,
    second_difference,
    trim_to_cycles,
    windowed_fit,
)
from .filters import FilterSpec, apply_filter, design_bandpass, filter_response, settling_time_cycles
from .windows import WindowKind, leakage_factor, window_samples, window_spectrum

__version__ = "0.1.0"

__all__ = [
    "BUDGET_SOURCES",
    "BudgetEntry",
    "CalibrationResult",
    "CalibrationScenario",
    "ComplexAmplitude",
    "FilterSpec",
    "LineTone",
    "ProcessingChain",
    "RecordPlan",
    "SpectrumModel",
    "UncertaintyBudget",
    "Waveform",
    "WindowKind",
    "apply_filter",
    "calibrate",
    "design_bandpass",
    "diff_correction",
    "filter_response",
    "leakage_factor",
    "plan_record_length",
    "process",
    "sam_fit",
    "second_difference",
    "settling_time_cycles",
    "trim_to_cycles",
    "window_samples",
    "window_spectrum",
    "windowed_fit",
]
