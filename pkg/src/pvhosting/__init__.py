"""
Stability of many grid-connected inverters sharing one grid impedance.

Transfer-function tools, the single-inverter current loop with its digital
delay, the grouped multi-inverter plant, count sweeps for hosting-capacity
ranges and time-domain checks.
"""
__version__ = "0.1.0"

from .errors import DiagnosticError, DomainError, HostingError, InputError
from .inverter import (
    TABLE_I,
    InverterParams,
    build_channel_model,
    build_controller,
    build_delay_chain,
    build_norton,
    delay_margin,
    split_winding_leakage,
)
from .stability import classify, delay_sweep, find_ranges, locus_trace, sweep_counts, system_poles
from .system import (
    TABLE_V_GRID,
    GridParams,
    PlantGroup,
    channel_tf,
    characteristic_polynomial,
    compose,
    grid_admittance,
    grid_impedance,
)
from .tf import Polynomial, RationalFunction, pade_delay, poly_roots, rf_reduce
from .timesim import SimConfig, build_statespace, detect_stability, run_linear, run_sampled

__all__ = [
    "__version__",
    "HostingError",
    "InputError",
    "DomainError",
    "DiagnosticError",
    "Polynomial",
    "RationalFunction",
    "poly_roots",
    "rf_reduce",
    "pade_delay",
    "InverterParams",
    "TABLE_I",
    "build_controller",
    "build_delay_chain",
    "build_channel_model",
    "build_norton",
    "split_winding_leakage",
    "delay_margin",
    "GridParams",
    "TABLE_V_GRID",
    "PlantGroup",
    "grid_impedance",
    "grid_admittance",
    "compose",
    "channel_tf",
    "characteristic_polynomial",
    "classify",
    "system_poles",
    "sweep_counts",
    "find_ranges",
    "delay_sweep",
    "locus_trace",
    "SimConfig",
    "build_statespace",
    "run_linear",
    "run_sampled",
    "detect_stability",
]
