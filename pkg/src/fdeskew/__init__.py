"""Document skew estimation with adaptive radial projection of the 2-D DFT magnitude."""

from .errors import DeskewError, ImageFormatError, NoContentError, PresetError, ValidationError
from .estimator import (
    PRESETS,
    EstimatorConfig,
    SkewEstimate,
    SpectrumKind,
    deskew,
    estimate_blockwise,
    estimate_skew,
    load_config,
    load_preset,
)
from .projection import AngleGrid, Branch, ProjectionProfile, Sampling, aggregate, argmax_angle, radial_projection

__version__ = "0.1.0"
