"""Vector magnetometry analysis for spin-1 defect ensembles in diamond.

The package covers the full chain from physics to maps:

  crystal    frames, spherical convention, the four defect axes
  spinmodel  spin-1 Hamiltonian, transition frequencies and strengths
  spectrum   dispersive multi-peak synthesis, peak finding, fitting
  inversion  four line positions -> vector field with uncertainties
  noise      averaged spectral densities, tone extraction, shot-noise floor
  scanpipe   grid-scan ingest, per-pixel processing, map emission
  cli        `nvmag` command-line front end
"""

from .crystal import (
    SphericalField,
    cartesian_to_spherical,
    nv_axes,
    project_field,
    spherical_to_cartesian,
)
from .errors import (
    ConfigError,
    DataError,
    GuessError,
    InversionError,
    NvmagError,
    UnobservableLineWarning,
)
from .spinmodel import (
    AxisProjection,
    SpinModelParams,
    TransitionTable,
    eigenlevels,
    hamiltonian_matrix,
    sweep_vs_angle,
    sweep_vs_field,
    transition_frequencies,
    transition_strength,
)
from .spectrum import (
    Lineshape,
    SpectrumFit,
    SpectrumModel,
    SweepTrace,
    dlorentzian,
    fit_spectrum,
    initial_guess,
    sample_grid,
    synthesize,
)
from .inversion import (
    InversionConfig,
    InversionResult,
    TransitionAssignment,
    default_assignment,
    invert,
    predict_frequencies,
    uniqueness_scan,
)
from .noise import (
    ASDResult,
    ShotNoiseEstimate,
    SlopeCalibration,
    TimeSeries,
    ToneFit,
    asd_averaged,
    band_sensitivity,
    extract_tone,
    shot_noise_limit,
    volts_to_field,
)
from .scanpipe import (
    FieldMap,
    PipelineConfig,
    PixelResult,
    ScanRecord,
    ScanSet,
    central_stats,
    emit,
    ingest,
    process,
    synthesize_scan,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SphericalField",
    "cartesian_to_spherical",
    "spherical_to_cartesian",
    "nv_axes",
    "project_field",
    "NvmagError",
    "DataError",
    "ConfigError",
    "GuessError",
    "InversionError",
    "UnobservableLineWarning",
    "SpinModelParams",
    "AxisProjection",
    "TransitionTable",
    "hamiltonian_matrix",
    "eigenlevels",
    "transition_frequencies",
    "transition_strength",
    "sweep_vs_field",
    "sweep_vs_angle",
    "Lineshape",
    "SpectrumModel",
    "SweepTrace",
    "SpectrumFit",
    "dlorentzian",
    "synthesize",
    "sample_grid",
    "initial_guess",
    "fit_spectrum",
    "TransitionAssignment",
    "InversionConfig",
    "InversionResult",
    "default_assignment",
    "predict_frequencies",
    "invert",
    "uniqueness_scan",
    "TimeSeries",
    "ASDResult",
    "SlopeCalibration",
    "ToneFit",
    "ShotNoiseEstimate",
    "asd_averaged",
    "band_sensitivity",
    "volts_to_field",
    "extract_tone",
    "shot_noise_limit",
    "ScanRecord",
    "ScanSet",
    "PipelineConfig",
    "PixelResult",
    "FieldMap",
    "ingest",
    "process",
    "central_stats",
    "emit",
    "synthesize_scan",
]
