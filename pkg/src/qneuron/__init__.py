"""Dissipative spin-J quantum neuron driven by qubit information reservoirs."""

from .collision import (
    CollisionChannel,
    CollisionConfig,
    ReservoirSpec,
    SteadyResult,
    Trajectory,
    collide_once,
    detect_steady,
    interaction_hamiltonian,
    propagator,
    run_dynamics,
)
from .estimator import QuantumNeuron
from .exceptions import DivergenceError, NotConvergedError, NumericalError, QNeuronError
from .learning import (
    TrainingConfig,
    TrainState,
    cost,
    descend,
    grad_cost_analytic,
    grad_cost_numeric,
    train,
)
from .master_eq import (
    LindbladCoefficients,
    LindbladSpec,
    bloch_rates_j1,
    coarse_grained_rhs,
    integrate,
    lindblad_coefficients,
    lindblad_rhs,
    liouvillian,
    steady_coherences_closed_form,
    steady_magnetization,
    steady_magnetization_closed_form,
    steady_state,
    two_reservoir_quotient,
)
from .spin import (
    PolarizationBasis,
    QubitState,
    SpinOperators,
    clebsch_gordan,
    make_polarization_basis,
    make_spin_operators,
    normalized_magnetization,
    reservoir_unit_state,
    spin_coherent_state,
)

__all__ = [
    "CollisionChannel",
    "CollisionConfig",
    "DivergenceError",
    "LindbladCoefficients",
    "LindbladSpec",
    "NotConvergedError",
    "NumericalError",
    "PolarizationBasis",
    "QNeuronError",
    "QuantumNeuron",
    "QubitState",
    "ReservoirSpec",
    "SpinOperators",
    "SteadyResult",
    "TrainState",
    "TrainingConfig",
    "Trajectory",
    "bloch_rates_j1",
    "clebsch_gordan",
    "coarse_grained_rhs",
    "collide_once",
    "cost",
    "descend",
    "detect_steady",
    "grad_cost_analytic",
    "grad_cost_numeric",
    "integrate",
    "interaction_hamiltonian",
    "lindblad_coefficients",
    "lindblad_rhs",
    "liouvillian",
    "make_polarization_basis",
    "make_spin_operators",
    "normalized_magnetization",
    "propagator",
    "reservoir_unit_state",
    "run_dynamics",
    "spin_coherent_state",
    "steady_coherences_closed_form",
    "steady_magnetization",
    "steady_magnetization_closed_form",
    "steady_state",
    "train",
    "two_reservoir_quotient",
]
