"""Single-snapshot super-resolution DOA estimation for uniform linear arrays.

Public surface: array model and scene synthesis, spatial-spectrum
analysis, the SAPD search estimator, reference baselines (OMP,
exhaustive DML, CRLB), and a Monte-Carlo benchmark harness.
"""
from .array_model import (
    ArrayConfig,
    Scene,
    SceneError,
    Snapshot,
    draw_scene,
    manifold,
    steering_derivative,
    steering_vector,
    synthesize_snapshot,
)
from .backend import backend_name, thread_limit
from .baselines import BaselineResult, crlb, dml_exhaustive, omp
from .solver import (
    DegenerateSupportError,
    DoaEstimate,
    RoiSet,
    SolverParams,
    SupportState,
    estimate,
    greedy_patch,
    ls_amplitudes,
    propose_patch,
    pseudo_derivative,
    residual,
    sapd_search,
    search_step,
    sign_constraint,
)
from .spectrum import (
    BeamFeature,
    Initialization,
    SpatialSpectrum,
    bartlett_spectrum,
    detect_peaks,
    estimate_noise_floor,
    extract_beam_features,
    initialize,
    theta_3db,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig", "Scene", "SceneError", "Snapshot", "draw_scene", "manifold",
    "steering_derivative", "steering_vector", "synthesize_snapshot",
    "backend_name", "thread_limit",
    "BaselineResult", "crlb", "dml_exhaustive", "omp",
    "DegenerateSupportError", "DoaEstimate", "RoiSet", "SolverParams",
    "SupportState", "estimate", "greedy_patch", "ls_amplitudes",
    "propose_patch", "pseudo_derivative",
    "residual", "sapd_search", "search_step", "sign_constraint",
    "BeamFeature", "Initialization", "SpatialSpectrum", "bartlett_spectrum",
    "detect_peaks", "estimate_noise_floor", "extract_beam_features",
    "initialize", "theta_3db",
    "__version__",
]
