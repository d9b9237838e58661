"""1D simulation and equivalent-circuit extraction for thin-film bulk acoustic resonators."""

from fbarsim.materials import DerivedAcoustics, Material, default_catalog, derive_acoustics, load_materials
from fbarsim.stack import Layer, Stack, canonical_quartet, parse_stack, write_stack
from fbarsim.mason import AdmittanceSpectrum, FrequencyGrid, input_admittance, stress_profile
from fbarsim.modes import ModeReport, analyze_modes, classify_mode, coupling, find_resonances, fom, q_bode
from fbarsim.mbvd import MbvdModel, MotionalBranch, derive_metrics, evaluate, fit_mbvd

__version__ = "0.1.0"

__all__ = [
    "AdmittanceSpectrum",
    "DerivedAcoustics",
    "FrequencyGrid",
    "Layer",
    "Material",
    "MbvdModel",
    "ModeReport",
    "MotionalBranch",
    "Stack",
    "analyze_modes",
    "canonical_quartet",
    "classify_mode",
    "coupling",
    "default_catalog",
    "derive_acoustics",
    "derive_metrics",
    "evaluate",
    "find_resonances",
    "fit_mbvd",
    "fom",
    "input_admittance",
    "load_materials",
    "parse_stack",
    "q_bode",
    "stress_profile",
    "write_stack",
]
