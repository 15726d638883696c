"""Set-indexed white noise, kernel RKHS checks and Ito calculus on finite grids."""

from .errors import *  # noqa: F401,F403
from .measure_space import (
    GridMeasure,
    GroundSpace,
    MeasurableSet,
    Partition,
    dyadic_ladder,
    intersect,
    measure_of,
    refine,
    union,
)
from .kernels import (
    BrownianMinKernel,
    GaussianRBFKernel,
    Kernel,
    MassProductKernel,
    SetIntersectionKernel,
    SzegoKernel,
    TabulatedKernel,
    dominance_constant,
    gram,
    membership_constant,
    psd_certificate,
)
from .white_noise import FieldEnsemble, WhiteNoiseField, haar_basis, sample_fields
from .markov import TransitionKernel, interpolate, iterate

__version__ = "0.1.0"
