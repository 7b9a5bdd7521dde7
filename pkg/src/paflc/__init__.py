"""Label engineering for PAF-based multi-person pose estimation."""
from ._kernels import BACKEND as KERNEL_BACKEND
from .core import (
    BinaryMask,
    GridSpec,
    LabelSet,
    PersonAnnotation,
    ScalarField,
    Scene,
    SkeletonSpec,
    VectorField,
    Visibility,
    coco17_skeleton,
    default_skeleton,
    sample_bilinear,
)
from .errors import DomainError, ShapeMismatchError

__version__ = "0.1.0"
