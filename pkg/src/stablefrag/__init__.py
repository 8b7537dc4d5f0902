"""Computational toolkit for the height fragmentation of the stable tree.

Exact laws (partition probabilities, skeleton marginals, semigroup
exponents), numerically evaluated one-sided stable densities, samplers for
the subordinator jump fields and conditioned trees, and Monte Carlo
verification of the dislocation-measure identities.
"""

__version__ = "0.1.0"

from .csbp import (
    CsbpParams,
    EulerPath,
    conditioned_entrance_laplace,
    csbp_sample_path,
    limit_T_Y1_laplace,
    u_r_lambda,
)
from .partitions import SetPartition, enumerate_set_partitions, kappa_minus, p_theta, rho_minus
from .special import (
    Alpha,
    StableConstants,
    chi_density,
    first_passage_density_q,
    positive_stable_density,
    rising_factorial,
    stable_constants,
)
from .streams import RngStream
from .subordinator import (
    JumpSequence,
    sample_conditioned_jumps,
    sample_jump_field,
    sample_positive_stable,
    size_biased_permutation,
)
from .trees import (
    DiscreteHeightPath,
    MarkedTree,
    RankedMassSequence,
    first_split_partition,
    fragment_at_height,
    sample_conditioned_gw_tree,
    sample_root_mark,
    sample_skeleton,
    skeleton_probability,
)
from .verification import (
    DislocationFunctional,
    dislocation_mc,
    phi0_quadrature,
    phi_closed,
    phi_levy_integral,
    tagged_moment,
)

__all__ = [
    "Alpha",
    "StableConstants",
    "RngStream",
    "JumpSequence",
    "SetPartition",
    "MarkedTree",
    "DiscreteHeightPath",
    "RankedMassSequence",
    "CsbpParams",
    "EulerPath",
    "DislocationFunctional",
    "rising_factorial",
    "positive_stable_density",
    "first_passage_density_q",
    "chi_density",
    "stable_constants",
    "sample_positive_stable",
    "sample_jump_field",
    "sample_conditioned_jumps",
    "size_biased_permutation",
    "enumerate_set_partitions",
    "rho_minus",
    "kappa_minus",
    "p_theta",
    "skeleton_probability",
    "sample_skeleton",
    "first_split_partition",
    "sample_root_mark",
    "sample_conditioned_gw_tree",
    "fragment_at_height",
    "u_r_lambda",
    "csbp_sample_path",
    "conditioned_entrance_laplace",
    "limit_T_Y1_laplace",
    "phi_closed",
    "phi_levy_integral",
    "phi0_quadrature",
    "tagged_moment",
    "dislocation_mc",
]
