"""Resistive bonding and earthing mesh between ship hull and shore earth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..params import GroundingParams


class OpenCircuitError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundingSolution:
    """Complex node potentials (volts, against remote earth) and branch
    currents (amperes). Branch directions: ``i_ngr`` terminal -> neutral,
    ``i_rgen`` hull -> generator neutral, ``i_earth_cores`` hull -> shore bar,
    ``i_neutral`` hull -> NGR terminal, ``i_switch`` terminal -> shore bar."""

    v_hull: complex
    v_shore_earth: complex
    v_terminal: complex
    v_touch: complex
    v_ds: complex
    i_ngr: complex
    i_rgen: complex
    i_earth_cores: complex
    i_neutral: complex
    i_switch: complex
    i_earth_ship: complex
    i_earth_shore: complex


_HULL, _SHORE, _TERM, _NEUTRAL = range(4)


def grounding_network_solve(params: GroundingParams, fault_current: complex,
                            generator_path: bool | None = None,
                            capacitive_shore: complex = 0.0,
                            capacitive_ship: complex = 0.0) -> GroundingSolution:
    """Nodal solution of the earthing mesh for a phase-to-hull fault.

    ``fault_current`` enters the hull from the faulted phase. It leaves the
    mesh through the NGR and, when ``generator_path`` is on, through the
    generator grounding resistor (both end on the system neutral), except
    for the capacitive shares ``capacitive_shore`` and ``capacitive_ship``
    that return to the phase conductors through the cable capacitance at
    the shore earth bar and at the hull.
    """
    if generator_path is None:
        generator_path = params.generator_grounding
    if not np.isfinite(complex(fault_current)):
        raise ValueError("fault current must be finite")
    branches = [
        (_HULL, _SHORE, params.r_bonding),
        (_HULL, _TERM, params.r_neutral),
        (_HULL, None, params.r_earth_ship),
        (_SHORE, None, params.r_earth_shore),
        (_TERM, _NEUTRAL, params.r_ngr),
    ]
    if params.switch_closed:
        branches.append((_TERM, _SHORE, params.r_switch))
    if generator_path:
        branches.append((_HULL, _NEUTRAL, params.r_gen))

    y = np.zeros((4, 4))
    for a, b, r in branches:
        g = 1.0 / r
        y[a, a] += g
        if b is not None:
            y[b, b] += g
            y[a, b] -= g
            y[b, a] -= g
    inj = np.zeros(4, dtype=complex)
    inj[_HULL] += fault_current - capacitive_ship
    inj[_SHORE] -= capacitive_shore
    inj[_NEUTRAL] -= fault_current - capacitive_shore - capacitive_ship
    if np.linalg.matrix_rank(y) < 4:
        raise OpenCircuitError("earthing mesh has no return path to the system neutral")
    v = np.linalg.solve(y.astype(complex), inj)

    def cur(a, b, r):
        return (v[a] - v[b]) / r

    i_switch = cur(_TERM, _SHORE, params.r_switch) if params.switch_closed else 0.0
    return GroundingSolution(
        v_hull=v[_HULL], v_shore_earth=v[_SHORE], v_terminal=v[_TERM],
        v_touch=v[_HULL] - v[_SHORE], v_ds=0.0 if params.switch_closed else v[_TERM] - v[_SHORE],
        i_ngr=cur(_TERM, _NEUTRAL, params.r_ngr),
        i_rgen=cur(_HULL, _NEUTRAL, params.r_gen) if generator_path else 0.0,
        i_earth_cores=cur(_HULL, _SHORE, params.r_bonding),
        i_neutral=cur(_HULL, _TERM, params.r_neutral),
        i_switch=i_switch,
        i_earth_ship=v[_HULL] / params.r_earth_ship,
        i_earth_shore=v[_SHORE] / params.r_earth_shore,
    )
