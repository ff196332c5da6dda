"""Continuous-time dissipative symmetrization of quantum networks."""

from .dynamics import Trajectory, check_persistent_connectivity, evolve, lyapunov_V, lyapunov_V_rate
from .estimation import (
    estimate_size,
    hypergeometric_pmf,
    relative_error_variance,
    run_estimation_protocol,
)
from .generators import (
    GeneralLindbladSpec,
    GeneratorHandle,
    UnitaryNoiseSpec,
    UnitaryTerm,
    WeightSchedule,
    apply_general_generator,
    apply_unitary_generator,
    build_combined_generator,
    commutant_residual,
    unitary_generator,
    validate_quasi_local,
)
from .lifted import evolve_lifted, kl_rate, kl_to_uniform, reconstruct_state
from .operators import DensityMatrix, NetworkLayout, embed_local, hs_inner, kron, validate_state
from .permutations import (
    Permutation,
    compose,
    generates_full_group,
    local_permutations,
    permutation_unitary,
    symmetrize,
)
from .preparation import build_local_stabilizer, prepare_network_state

__version__ = "0.1.0"
