"""Delayed LQG analysis of linear quantum feedback systems."""

__version__ = "0.1.0"

from .delayperf import (  # noqa: E402
    FitResult, PerformanceCurve, delay_penalty, fit_linear_sinusoid, optimal_cost,
    optimize_phi, ripple_frequency, sweep_delay,
)
from .lqgsynth import GainSet, synthesize  # noqa: E402
from .mcsim import SimConfig, SimEstimate, estimate_cost  # noqa: E402
from .plantmodel import (  # noqa: E402
    PlantSpec, SynthesisModel, build_synthesis_model, check_assumptions,
    classify_stability, preset_damped_cavity, preset_harmonic,
)
from .smithctrl import DelayController, synthesize_controller  # noqa: E402
