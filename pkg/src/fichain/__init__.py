"""Functional-inequality constants for finite reversible Markov chains.

Poincare, modified log-Sobolev and log-Sobolev constants, the sparsity
parameter p, the r-regular majorant f* and sampled checks of the
comparison inequalities behind the MLSI-to-LSI upgrade.
"""

from .chain import (
    DistanceTables,
    ReversibleChain,
    build_chain,
    dirichlet,
    distances,
    entropy,
    expectation,
    observable,
    sparsity,
    total_rate,
    variance,
)
from .functional import (
    ConstantEstimate,
    OptimizerConfig,
    entropy_dual_gap,
    estimate_tls,
    estimate_tmls,
    h_constant,
    poor_upper_bound,
    t_rel,
    theorem1_upper_bound,
    trivial_tls,
    two_point_tls,
)
from .models import (
    GraphSpec,
    ZrpSpec,
    build_graph_walk,
    build_lamplighter,
    build_trivial,
    build_zrp,
    chain_from_spec,
    explicit_spec,
    graph_spectral_gap,
    random_reversible_chain,
    spectral_gap_of_G,
    zrp_ls_upper_bound,
)
from .regularization import (
    Margin,
    RegularizationResult,
    default_r,
    is_regular,
    kappa,
    regularize,
    verify_dirichlet_comparison,
    verify_entropy_comparison,
    verify_entropy_lemmas,
    verify_lemma_r,
    verify_local_lemma,
)
from .verification import CheckRecord, VerificationReport, run_suite

__version__ = "0.1.0"
