"""ODMR spectrum simulator for NV-center ensembles in 13C-enriched diamond."""

__version__ = "0.1.0"

from .analysis import ComparisonReport, Peak, compare, find_peaks
from .bath import (
    BathModel,
    BathParams,
    NearCatalogEntry,
    background_sigma,
    far_shell_sigma,
    near_sigma,
    shell_sigma,
    total_sigma,
)
from .ensemble import (
    HistogramSpec,
    InstanceParams,
    SimulationConfig,
    Spectrum,
    orientation_field,
    sample_instance,
    simulate_spectrum,
    sweep_field,
)
from .presets import PRESETS, get_preset
from .spincore import (
    Eigensystem,
    FieldSpec,
    HyperfineCoupling,
    SpinRegister,
    TransitionLine,
    ZfsParams,
    build_hamiltonian,
    build_register,
    eigendecompose,
    embed_operator,
    extract_transitions,
    factorized_transitions,
)

__all__ = [
    "__version__",
    "BathModel",
    "BathParams",
    "ComparisonReport",
    "Eigensystem",
    "FieldSpec",
    "HistogramSpec",
    "HyperfineCoupling",
    "InstanceParams",
    "NearCatalogEntry",
    "Peak",
    "PRESETS",
    "SimulationConfig",
    "Spectrum",
    "SpinRegister",
    "TransitionLine",
    "ZfsParams",
    "background_sigma",
    "build_hamiltonian",
    "build_register",
    "compare",
    "eigendecompose",
    "embed_operator",
    "extract_transitions",
    "factorized_transitions",
    "far_shell_sigma",
    "find_peaks",
    "get_preset",
    "near_sigma",
    "orientation_field",
    "sample_instance",
    "shell_sigma",
    "simulate_spectrum",
    "sweep_field",
    "total_sigma",
]
