"""Simulator of cross-operator interference from a tunable reflective surface.

A surface tuned to focus one operator's carrier keeps scattering at every
other frequency; this package models the element circuit behind that
effect, the tuned array's re-radiated field, the perturbed multi-antenna
channels, and the resulting spectral-efficiency cost to users the surface
was never meant to serve.
"""

from ._version import __version__
from .array_field import (PatternCut, RisArray, ScatteringState, Wave, build_array,
                          directivity_pattern, main_lobe_angle, pattern_to_csv,
                          reflected_field, scattering_state)
from .channels import (ChannelSet, Node, cascade_gains, effective_channel,
                       freespace_pathloss, los_channel)
from .circuit import (CapacitanceSolution, CircuitParams, Reflection,
                      element_impedance, element_reflection, phase_to_capacitance,
                      reflection_phase_interval)
from .engine import (CaseMetrics, OperatorConfig, RisConfig, Scenario, SweepSpec,
                     UeConfig, derive_seed, export_results, fractional_boi,
                     grid_shape, load_scenario, run_case, run_pattern,
                     squint_sensitivity_report, sweep, table_from_json)
from .errors import (ConfigError, ConfigWarning, CorrelatedChannelsError,
                     DegenerateChannelError, FrequencyMismatchError,
                     NumericalError, SingularityError, SquintSimError)
from .precoding import (LinkMetrics, PrecodeResult, link_metrics, mrt_precoder,
                        noise_power, zf_precoder)
from .presets import PRESET_NAMES, load_preset, preset_config, preset_text
from .tuning import (ClampEntry, OptimizationLog, TuningResult,
                     align_phases_single_target, evaluate_off_frequency,
                     optimize_weighted_sum_power, quantize_phases,
                     realize_capacitances, weighted_sum_power)

__all__ = [
    "__version__",
    # circuit
    "CircuitParams", "Reflection", "CapacitanceSolution",
    "element_impedance", "element_reflection", "phase_to_capacitance",
    "reflection_phase_interval",
    # array field
    "RisArray", "ScatteringState", "Wave", "PatternCut",
    "build_array", "scattering_state", "reflected_field",
    "directivity_pattern", "main_lobe_angle", "pattern_to_csv",
    # channels
    "Node", "ChannelSet", "freespace_pathloss", "los_channel",
    "effective_channel", "cascade_gains",
    # precoding
    "PrecodeResult", "LinkMetrics", "noise_power",
    "mrt_precoder", "zf_precoder", "link_metrics",
    # tuning
    "ClampEntry", "OptimizationLog", "TuningResult",
    "align_phases_single_target", "optimize_weighted_sum_power",
    "weighted_sum_power", "realize_capacitances", "evaluate_off_frequency",
    "quantize_phases",
    # engine
    "UeConfig", "OperatorConfig", "RisConfig", "Scenario", "SweepSpec",
    "CaseMetrics", "load_scenario", "run_case", "sweep", "fractional_boi",
    "export_results", "table_from_json", "run_pattern",
    "squint_sensitivity_report", "derive_seed", "grid_shape",
    # presets
    "PRESET_NAMES", "preset_config", "preset_text", "load_preset",
    # errors
    "SquintSimError", "ConfigError", "ConfigWarning", "NumericalError",
    "SingularityError", "DegenerateChannelError", "CorrelatedChannelsError",
    "FrequencyMismatchError",
]
