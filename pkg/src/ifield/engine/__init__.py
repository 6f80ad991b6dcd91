from .gradcheck import GradcheckReport, gradcheck, numeric_grad
from .value import GradientMap, Value, as_value, backward, concat, maximum, minimum, scale_grad, stack

__all__ = [
    "GradcheckReport",
    "GradientMap",
    "Value",
    "as_value",
    "backward",
    "concat",
    "gradcheck",
    "maximum",
    "minimum",
    "numeric_grad",
    "scale_grad",
    "stack",
]
