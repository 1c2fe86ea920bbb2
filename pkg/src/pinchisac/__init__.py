"""Joint pinching-antenna placement and transmit beamforming for integrated
sensing and communication."""

from .baselines import (PlacementPolicy, exhaustive_search, fixed_position_beamforming)
from .beamspan import SpanCoefficients
from .convex import ConvexProgram, ProgramBuilder, SolverSettings, solve
from .estimator import PinchingISAC
from .experiments import (ConfigError, ScenarioConfig, TrialResult, emit, monte_carlo,
                          run_case_study, run_sweep)
from .geometry import RfConstants, SystemGeometry, build_channels
from .optimizer import optimize_placement
from .sca import ScaConfig, ScaProblem, sca_solve
from .sensing import DetectionSpec, detection_probability

__all__ = [
    "ConfigError", "ConvexProgram", "DetectionSpec", "PinchingISAC", "PlacementPolicy",
    "ProgramBuilder", "RfConstants", "ScaConfig", "ScaProblem", "ScenarioConfig",
    "SolverSettings", "SpanCoefficients", "SystemGeometry", "TrialResult", "build_channels",
    "detection_probability", "emit", "exhaustive_search", "fixed_position_beamforming",
    "monte_carlo", "optimize_placement", "run_case_study", "run_sweep", "sca_solve", "solve",
]
__version__ = "0.1.0"
