from .cable import PiElements, cable_pi_elements
from .grounding import GroundingSolution, grounding_network_solve
from .machine import Machine, MachineState, exciter_step, governor_step, machine_step
from .zip_load import ZipResult, rated_admittance, zip_current

__all__ = [
    "GroundingSolution", "Machine", "MachineState", "PiElements", "ZipResult",
    "cable_pi_elements", "exciter_step", "governor_step", "grounding_network_solve",
    "machine_step", "rated_admittance", "zip_current",
]
