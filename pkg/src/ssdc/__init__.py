"""Stagewise stochastic optimization for difference-of-convex objectives.

The objective is ``F(x) = g(x) + r(x) - h(x)`` with convex ``g`` and ``h``
and a regularizer ``r`` that has a cheap proximal map.
"""

from .criticality import (
    CriticalityEstimate,
    brute_force_critical,
    holder_bound,
    holder_criticality,
    l0_support_minimizers,
    prox_point,
)
from .data import Dataset, gen_pu, gen_synthetic, read_libsvm, scale_features, write_libsvm
from .driver import (
    GammaSchedule,
    RunReport,
    SamplingLaw,
    SolverSpec,
    moreau_residual,
    mu_for_target,
    schedule_gamma,
    ssdc_moreau_run,
    ssdc_run,
    stage_budget,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    ParameterError,
    ParseError,
    SsdcError,
)
from .losses import LossSpec, build_erm_dc, build_erm_nonconvex, build_pu_problem, loss_spec
from .problem import (
    DcProblem,
    GradCounter,
    MajorantSubproblem,
    ProblemConstants,
    build_majorant,
    objective_value,
)
from .prox import (
    DcPenalty,
    MoreauEnvelope,
    dc_penalty,
    envelope_value,
    moreau_prox_and_subgrad,
    prox_l0,
    prox_l1,
    prox_lp_half,
    shifted_prox,
)
from .solvers import (
    AdaGradConfig,
    SpgConfig,
    SvrgConfig,
    adagrad_solve,
    spg_solve,
    svrg_solve,
)

__version__ = "0.1.0"
