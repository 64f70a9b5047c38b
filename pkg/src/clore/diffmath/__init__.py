from .gradcheck import max_relative_error, numeric_gradient
from .kernels import BACKEND_NAME
from .tape import Tape, Value

__all__ = ["Tape", "Value", "BACKEND_NAME", "numeric_gradient", "max_relative_error"]
