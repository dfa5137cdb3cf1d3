from mdhr_lib.libs.tensor.tensor import Tensor, Tape, Node, backward, precision, debug_checks, get_default_dtype, set_default_dtype
from mdhr_lib.libs.tensor.gradcheck import gradcheck, numerical_gradient, analytic_gradient, parameter_gradcheck
from mdhr_lib.libs.tensor.serialize import read_tensor, write_tensor, MAGIC_F32, MAGIC_F64
import mdhr_lib.libs.tensor.ops as ops
