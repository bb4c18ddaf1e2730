"""Tropical convolutional neural networks.

Min-plus and max-plus convolution layers in 1D/2D/3D, compound and
parallel mixed forms with learnable mixing weights, sub-gradient training,
and closed-form operation counting.
"""

from . import kernels
from .errors import ContractError, DomainError, FormatError, ShapeError
from .mixed import MixedKind, MixMode, MixParams
from .tensor import Tensor, from_array, uniform_fill, zeros
from .tropical import ArgIndexMap, ChannelMode, ConvSpec, WindowMode

__version__ = "0.1.0"

__all__ = [
    "ArgIndexMap", "ChannelMode", "ContractError", "ConvSpec", "DomainError",
    "FormatError", "MixMode", "MixParams", "MixedKind", "ShapeError", "Tensor",
    "WindowMode", "from_array", "kernels", "uniform_fill", "zeros",
]
