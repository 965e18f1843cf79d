"""Numerical verification of anchored bundles, semisprays and Lie algebroids."""

from .algebroid import (
    AlgebroidStructure,
    FormLocal,
    anchor_hom_defect,
    bracket,
    d_squared_defect,
    exterior_derivative_components,
    exterior_derivative_eval,
    jacobi_defect,
    leibniz_defect,
)
from .bundle import (
    AnchoredBundleSpec,
    Defect,
    SectionLocal,
    TransitionMap,
    VectorFieldLocal,
    anchor_apply,
    anchor_compat_defect,
    cocycle_defect,
    tensor_anchor,
)
from .morphism import MorphismLocal, compose, identity_morphism, morphism_defect, pullback_form
from .numerics import SmoothMap, Trajectory, directional_derivative, fd_jacobian, rk4_integrate
from .semispray import (
    BundleCurve,
    SemisprayLocal,
    admissibility_defect,
    build_semispray,
    euler_check,
    integrate_semispray,
    recover_anchor,
    spray_defect,
    transformation_defect,
)
