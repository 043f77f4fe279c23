"""Finite-instance computations in Lipschitz free p-spaces."""
from .errors import ResourceError, StructuralError
from .qmetric import (
    PMetricSpace,
    dyadic,
    integer_segment,
    line_space,
    maltese_sum,
    metric_envelope,
    quotient,
    random_space,
    snowflake,
    validate,
)
from .freecore import FreeOperator, LipschitzFunction, Molecule, norm, operator_norm

__version__ = "0.1.0"
