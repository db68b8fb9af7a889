"""Desk-scale Langevin dynamics and simulated annealing laboratory.

Simulators for the discrete and continuous gradient-Langevin processes and
their annealed variants, every explicit constant from the moment and coupling
bounds, Rademacher-complexity estimators, independent brute-force oracles, and
an experiment harness that validates the testable inequalities end to end.
"""

from .bounds import (
    CouplingReport,
    GenBound,
    LevelThresholds,
    coupling_constants,
    covering_bound_theorem,
    covering_gen_bound,
    divergence_tail_bound,
    epsilon_of,
    level_thresholds,
    lyapunov_constants,
    moment_bound,
    r1_threshold,
    theorem_bound_shape,
    theorem_radius,
)
from .errors import AnnealabError, NumericError, UsageError
from .losses import (
    LossModel,
    RegularityConstants,
    RegularityReport,
    SampleSet,
    builtin_models,
    quadratic_data,
    ripple,
    smoothed_double_well,
    verify_regularity,
)
from .reference import (
    GibbsSpec,
    GridMinResult,
    empirical_min,
    gibbs_expectation,
    grid_min,
    make_gibbs_spec,
    ou_second_moment,
)
from .dynamics import (
    CoupledRun,
    MomentEstimate,
    NoiseStream,
    ProbabilityEstimate,
    TrajectoryEnsemble,
    exit_probability,
    flow_divergence_probability,
    moment_estimate,
    run_coupled,
    run_sa_discrete_exact,
    run_sde,
    run_sgld_discrete,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    MetricRow,
    Verdict,
    emit,
    lemma_suite,
    run_experiment,
)
from .rademacher import (
    CoveringNumber,
    GenGapPoint,
    RademacherEstimate,
    covering_number_ball,
    empirical_rademacher,
    gen_gap_estimate,
)
from .schedules import Schedule, harmonic, harmonic_inverse

__version__ = "0.1.0"
