"""Sinusoidal steady-state (phasor) solution of a :class:`Circuit`.

Phasors are peak values: ``x(t) = Re(X exp(j w t))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import CAP, Circuit


class TopologyError(ValueError):
    pass


@dataclass
class PhasorSolution:
    omega: float
    nodes: list[str]
    voltages: np.ndarray  # per node, complex peak volts
    currents: np.ndarray  # per branch (NaN for branches outside the solved groups)
    branch_voltages: np.ndarray
    circuit: Circuit

    def v(self, node: str) -> complex:
        if node == "gnd":
            return 0j
        return complex(self.voltages[self.nodes.index(node)])

    def i(self, branch: str) -> complex:
        return complex(self.currents[self.circuit.index(branch)])


def branch_admittances(circuit: Circuit, omega: float, overrides: dict[int, complex] | None = None) -> np.ndarray:
    y = np.zeros(len(circuit.branches), dtype=complex)
    for k, b in enumerate(circuit.branches):
        if not b.enabled:
            continue
        if b.kind == CAP:
            y[k] = 1j * omega * b.c
        else:
            y[k] = 1.0 / complex(b.r, omega * b.l)
    for k, val in (overrides or {}).items():
        y[k] = val
    return y


def solve_phasors(circuit: Circuit, omega: float, emf: dict[int, complex] | None = None,
                  groups: set[str] | None = None, fixed: dict[str, complex] | None = None,
                  injections: dict[str, complex] | None = None,
                  admittance_overrides: dict[int, complex] | None = None) -> PhasorSolution:
    """Nodal phasor solve restricted to the branches of ``groups``.

    ``emf`` maps branch indices to source phasors (same sign convention as
    the time-domain branch law), ``fixed`` pins node voltages (ideal
    sources to ground) and ``injections`` adds current sources into nodes.
    """
    emf = emf or {}
    fixed = fixed or {}
    injections = injections or {}
    active = [k for k, b in enumerate(circuit.branches) if groups is None or b.group in groups]
    y_branch = branch_admittances(circuit, omega, admittance_overrides)
    inc = circuit.incidence_matrix()
    used = sorted({n for k in active for n in circuit.branches[k].incidence})
    fixed_idx = {circuit.nodes.index(n): val for n, val in fixed.items()}
    free = [n for n in used if n not in fixed_idx]
    c = inc[:, active]
    yb = y_branch[active]
    e = np.array([emf.get(k, 0.0) for k in active], dtype=complex)
    ymat = (c * yb) @ c.T
    src = np.zeros(len(circuit.nodes), dtype=complex)
    for n, val in injections.items():
        src[circuit.nodes.index(n)] += val
    rhs = src - c @ (yb * e)
    v = np.full(len(circuit.nodes), np.nan, dtype=complex)
    for n, val in fixed_idx.items():
        v[n] = val
    fx = list(fixed_idx)
    if free:
        a = ymat[np.ix_(free, free)]
        b = rhs[free]
        if fx:
            b = b - ymat[np.ix_(free, fx)] @ v[fx]
        if np.linalg.cond(a) > 1e15:
            raise TopologyError("singular phasor admittance matrix (floating sub-network)")
        v[free] = np.linalg.solve(a, b)
    vz = np.where(np.isnan(v), 0.0, v)
    u = inc.T @ vz
    i = np.full(len(circuit.branches), np.nan, dtype=complex)
    i[active] = yb * (u[active] + e)
    return PhasorSolution(omega, list(circuit.nodes), v, i, u, circuit)
