"""fls: free-fermion Lindblad sampler.

Exact Pfaffian-based sampling for unitary free fermions, stochastic
unravelings for three efficiently simulable dissipative classes with
a-priori error bounds, a dense brute-force Lindblad oracle for validation,
and dissipative entangling-gate error models.
"""

__version__ = "0.1.0"

from .model import (
    AmbiguousClass, ClassTag, Ec2Jump, ExperimentConfig, FockConfiguration,
    HamiltonianSegment, LindbladOperator, LindbladSet, QuadraticHamiltonian,
    ValidationReport, classify_set, config_from_dict, fock_operator_as_majorana,
    load_config, validate_hamiltonian,
)
from .gaussian import GaussianPropagator, propagate, reduce_linear
from .pfaffian import SkewMatrix, pfaffian, pfaffian_submatrix
from .sampler import (
    OutcomeDistributionHandle, build_M, build_handle, enumerate_distribution,
    handle_for_hamiltonian, probability, probability_from_T, sample,
)
from .unraveling import (
    SimulationModel, TrajectoryOutcome, TrajectoryPlan, TrajectoryResult,
    run_trajectories,
)
from .oracle import lindblad_evolve, majorana_dense, measure_distribution, tvd
from .bounds import choose_dt, correction_norms, error_bound, runtime_estimate
from .gates import (
    GateSpec, leakage_nonhermitian, optimal_time, simulate_cz,
    sweep_hardness_diagram, total_error,
)
