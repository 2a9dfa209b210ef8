"""Lumped pi-section cable elements."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..params import CableParams


@dataclass(frozen=True)
class PiElements:
    r: float  # series resistance, ohm
    l: float  # series inductance, H
    c_total: float  # total shunt capacitance, F
    x: float  # series reactance at the rating frequency, ohm

    @property
    def c_end(self) -> float:
        return 0.5 * self.c_total


def cable_pi_elements(params: CableParams, length: float | None = None) -> PiElements:
    """Series R, L and shunt C of ``params.parallel`` identical cables in parallel."""
    length = params.length if length is None else length
    if length is None:
        raise ValueError("cable length is not set (calibrate it first)")
    if length < 0:
        raise ValueError("cable length must be non-negative")
    n = params.parallel
    x = params.x_phase * length / n
    return PiElements(r=params.r_phase * length / n,
                      l=x / (2.0 * math.pi * params.frequency),
                      c_total=params.c_phase * length * n,
                      x=x)


def earth_core_impedance(params: CableParams, length: float) -> complex:
    """Parallel earth cores as a complex impedance."""
    return complex(params.r_earth, params.x_earth) * length / params.parallel
