"""Multimode Landau polaritons: dispersions, Hopfield branches, transmission maps and coupling fits."""

from .config import Config, load_config, parse_config
from .fit import FitProblem, FitResult, PeakDataset, PeakPoint, assign_branches, fit, synthetic_peaks
from .hopfield import (
    CouplingSet,
    PolaritonSpectrum,
    build_matrix,
    eigendecompose,
    polariton_sweep,
)
from .linalg import NumericalError
from .optics import (
    CavityGeometry,
    ConfigError,
    Layer,
    LayerStack,
    extract_peaks,
    cavity_stack,
    transfer_matrix_transmittance,
    transmission_map,
)
from .physics import (
    SampleParams,
    cyclotron_frequency,
    magnetoplasmon_frequency,
    gaas_sample,
    plasmon_frequency,
    zero_detuning_field,
)

__version__ = "0.1.0"

__all__ = [
    "CavityGeometry",
    "Config",
    "ConfigError",
    "CouplingSet",
    "FitProblem",
    "FitResult",
    "Layer",
    "LayerStack",
    "NumericalError",
    "PeakDataset",
    "PeakPoint",
    "PolaritonSpectrum",
    "SampleParams",
    "assign_branches",
    "build_matrix",
    "cyclotron_frequency",
    "eigendecompose",
    "extract_peaks",
    "fit",
    "load_config",
    "magnetoplasmon_frequency",
    "gaas_sample",
    "parse_config",
    "plasmon_frequency",
    "polariton_sweep",
    "cavity_stack",
    "synthetic_peaks",
    "transfer_matrix_transmittance",
    "transmission_map",
    "zero_detuning_field",
]
