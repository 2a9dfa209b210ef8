from .circuit import Circuit, CompanionSolver
from .phasor import PhasorSolution, TopologyError, solve_phasors
from .system import (
    CHANNELS,
    FaultPhasors,
    FaultSpec,
    ShoreSystem,
    Topology,
    apply_fault,
    assemble,
    calibrate_cable_length,
    cable_length,
    steady_phasor_solve,
)

__all__ = [
    "CHANNELS", "Circuit", "CompanionSolver", "FaultSpec", "PhasorSolution", "ShoreSystem", "Topology",
    "TopologyError", "FaultPhasors", "apply_fault", "assemble", "cable_length", "calibrate_cable_length", "solve_phasors",
    "steady_phasor_solve",
]
