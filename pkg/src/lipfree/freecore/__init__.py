"""Molecules, the free p-space quasinorm and operators between free spaces."""
from .molecule import (
    EllP,
    LipschitzFunction,
    LpSum,
    Molecule,
    atoms,
    elementary_matrix,
    elementary_molecules,
    lipschitz_constant,
    lp_quasinorm,
)
from .norm import NormCertificate, batch_norms, dual_lower_bound, norm, transport_lp, tree_search
from .operator import (
    FreeOperator,
    NormCache,
    OperatorNorm,
    compose,
    coordinate_norms,
    exact_is_identity,
    identity,
    operator_from_images,
    operator_from_lipschitz,
    operator_norm,
)
