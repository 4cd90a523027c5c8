"""Numerical toolkit for proximity operators.

Checks whether a map can be the proximity operator of some penalty, recovers
that penalty when it can, and produces concrete witnesses when it cannot.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DomainError, LocusError, NoInverseError, ProxAtlasError, ShapeError,
    SingularJacobianError, SpecError, StateError, UnsupportedError,
)
from .fields import Box, OperatorSpec, make_operator  # noqa: E402
from .shrinkage import (  # noqa: E402
    GroupStructure, NeighborhoodSystem, ScalarRule, SocialShrinkageSpec,
    derive_partition, eval_group_ew, eval_group_lasso, eval_scalar, eval_social,
    group_operator, scalar_operator, social_operator,
)
from .catalog import CATALOG, parse_operator_id, resolve_operator  # noqa: E402
from .numdiff import fd_jacobian, lipschitz_estimate, spectral_verdict  # noqa: E402
from .proxcheck import (  # noqa: E402
    CheckReport, brute_force_prox_oracle, check_jacobian_prox, check_monotone_1d,
    classify_penalty, find_asymmetry_witness,
)
from .reconstruct import (  # noqa: E402
    convexity_audit, path_independence_defect, penalty_from_potential,
    penalty_gradient, potential_line_integral, reconstruct,
)
