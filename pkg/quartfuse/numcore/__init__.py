"""Dense tensors with reverse-mode differentiation and a finite-difference oracle."""
from .tensor import DTYPES, Node, Tensor, Workspace
from . import ops
from .ops import backward
from .gradcheck import grad_check, numeric_grad
from .blob import decode_array, encode_array, read_array, write_array
