"""Individual-based eco-evolution simulator, its jump-process limit, and a
statistical harness checking the convergence claims connecting them."""

from .model import (
    EcologyParams,
    GaussianMutationKernel,
    InvasionClassification,
    InvasionOutcome,
    TraitSpace,
    classify_pair,
    equilibrium_density,
    invasion_fitness,
    mutation_rate_beta,
    validate_assumptions,
)
from .micro import PopulationState, Trajectory, first_mutation_time, simulate, step, support
from .limits import classify_equilibrium_flow, integrate_dimorphic, integrate_logistic
from .branching import (
    BranchingParams,
    extinction_probability,
    extinction_time_cdf,
    hitting_bound_check,
    simulate_branching,
)
from .tss import sample_jump_kernel, simulate_tss, tss_marginal
from .harness import (
    ScenarioConfig,
    UKRule,
    compare_fdd,
    default_scenario,
    estimate_invasion_probability,
    exit_time_scaling,
    mutation_time_test,
    run_replicates,
    strong_selection_scenario,
)

__version__ = "0.1.0"
