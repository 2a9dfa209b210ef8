"""Polynomial (ZIP) load."""

from __future__ import annotations

from dataclasses import dataclass

from ..params import ZipParams


@dataclass(frozen=True)
class ZipResult:
    power: float  # demanded active power, per unit of rated P (Q scales identically)
    current: float  # current magnitude drawn, per unit of rated current
    admittance: float  # per unit of the rated-voltage admittance
    low_voltage: bool  # constant-P share demanded below its switch-over voltage


def zip_current(voltage: float, params: ZipParams) -> ZipResult:
    """Demanded power P(V) = P0 (z V^2 + i V + p) and the current actually drawn.

    Below ``params.v_switch`` the constant-power share is frozen into the
    impedance it presents at the switch-over voltage, so the drawn current
    stays bounded at zero voltage; ``low_voltage`` flags that case.
    """
    if voltage < 0:
        raise ValueError("voltage magnitude must be non-negative")
    z, i, p = params.z, params.i, params.p
    demanded = z * voltage ** 2 + i * voltage + p
    low = voltage < params.v_switch and p > 0
    y_p = p / params.v_switch ** 2 if low else (p / voltage ** 2 if voltage > 0 else 0.0)
    y_i = i / voltage if voltage > 0 else 0.0
    admittance = z + y_p + (y_i if voltage > 0 else 0.0)
    current = z * voltage + y_p * voltage + (i if voltage > 0 else 0.0)
    return ZipResult(demanded, current, admittance, low)


def rated_admittance(params: ZipParams, v_line: float) -> complex:
    """Per-phase admittance (siemens) drawing the rated complex power at ``v_line``."""
    s = params.rating / 3.0
    q = s * (1.0 - params.power_factor ** 2) ** 0.5
    return complex(s * params.power_factor, -q) / (v_line / 3 ** 0.5) ** 2
