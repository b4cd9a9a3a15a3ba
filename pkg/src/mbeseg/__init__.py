"""Level-set image segmentation with MBE regularization and SAV time stepping."""

from .errors import (ConfigError, DegenerateInitError, DivergenceError, FixtureError,
                     ImageFormatError, MaskError, MbesegError, NonPositiveEnergyError,
                     ParameterError, SchemeInstabilityError)
from .levelset import DiracSpec, InitSpec, Disk, Rectangle, Annulus, Polygon, MaskShape
from .model import GAC, RSF, ModelSpec, Regularizer
from .solver import EnergyTrace, SegmentationResult, run
from .bench import Bias, FixtureSpec, dice, generate, iou

__version__ = "0.1.0"
