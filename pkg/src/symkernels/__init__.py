"""Convolutional networks with symmetry-constrained 3x3 kernels."""

from symkernels.symmetry import (
    SymmetryLevel,
    expand_kernel,
    fold_gradient,
    free_param_count,
    is_symmetric,
    symmetry_group,
)
from symkernels.tensor import Tensor, concat_channels, from_values, zeros

__version__ = "0.1.0"

__all__ = [
    "SymmetryLevel",
    "Tensor",
    "concat_channels",
    "expand_kernel",
    "fold_gradient",
    "free_param_count",
    "from_values",
    "is_symmetric",
    "symmetry_group",
    "zeros",
]
