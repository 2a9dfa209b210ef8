"""Generic nodal circuit with companion-model stepping.

A circuit is a list of nodes (ground excluded) and branches. Every branch
has an incidence vector ``c`` over the nodes; its voltage is ``u = c . v``
and its current ``i`` is injected as ``-c * i``. Branch laws:

* ``rl``: ``u + e = R i + L di/dt`` (``L = 0`` gives a resistor)
* ``c``: ``i = C du/dt``

Coupled windings are ``rl`` branches whose incidence has more than two
non-zero entries (ideal transformer ratio folded into ``c``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import IntegrationError

RL, CAP = 0, 1


@dataclass
class Branch:
    name: str
    kind: int
    incidence: dict[int, float]
    r: float = 0.0
    l: float = 0.0
    c: float = 0.0
    enabled: bool = True
    group: str = "ship"


@dataclass
class Circuit:
    nodes: list[str] = field(default_factory=list)
    branches: list[Branch] = field(default_factory=list)

    def node(self, name: str) -> int:
        if name == "gnd":
            return -1
        try:
            return self.nodes.index(name)
        except ValueError:
            self.nodes.append(name)
            return len(self.nodes) - 1

    def _inc(self, a: str, b: str) -> dict[int, float]:
        inc: dict[int, float] = {}
        ia, ib = self.node(a), self.node(b)
        if ia >= 0:
            inc[ia] = 1.0
        if ib >= 0:
            inc[ib] = inc.get(ib, 0.0) - 1.0
        return inc

    def add_rl(self, name: str, a: str, b: str, r: float, l: float = 0.0, **kw) -> int:
        if r <= 0 and l <= 0:
            raise ValueError(f"branch {name} needs positive resistance or inductance")
        self.branches.append(Branch(name, RL, self._inc(a, b), r, l, **kw))
        return len(self.branches) - 1

    def add_c(self, name: str, a: str, b: str, c: float, **kw) -> int:
        if c <= 0:
            raise ValueError(f"capacitor {name} must be positive")
        self.branches.append(Branch(name, CAP, self._inc(a, b), c=c, **kw))
        return len(self.branches) - 1

    def add_coupled(self, name: str, incidence: dict[str, float], r: float, l: float, **kw) -> int:
        inc = {self.node(n): w for n, w in incidence.items() if n != "gnd"}
        self.branches.append(Branch(name, RL, inc, r, l, **kw))
        return len(self.branches) - 1

    def index(self, name: str) -> int:
        for k, b in enumerate(self.branches):
            if b.name == name:
                return k
        raise KeyError(name)

    def incidence_matrix(self) -> np.ndarray:
        m = np.zeros((len(self.nodes), len(self.branches)))
        for k, b in enumerate(self.branches):
            for n, w in b.incidence.items():
                m[n, k] = w
        return m


class CompanionSolver:
    """Fixed-step nodal solver with theta-method companion models.

    ``theta = 0.5`` is the trapezoidal rule; ``theta = 1`` (backward Euler)
    is used for a few steps after each topology change to damp the
    numerical oscillation the trapezoidal rule leaves on discontinuities.
    """

    def __init__(self, circuit: Circuit, dt: float):
        self.circuit = circuit
        self.dt = dt
        self.incidence = circuit.incidence_matrix()
        self.nb = len(circuit.branches)
        self.nn = len(circuit.nodes)
        kind = np.array([b.kind for b in circuit.branches])
        self.is_cap = kind == CAP
        self.r = np.array([b.r for b in circuit.branches])
        self.l = np.array([b.l for b in circuit.branches])
        self.c = np.array([b.c for b in circuit.branches])
        self.enabled = np.array([b.enabled for b in circuit.branches])
        self.i = np.zeros(self.nb)
        self.u = np.zeros(self.nb)
        self.e = np.zeros(self.nb)
        self.v = np.zeros(self.nn)
        self.injection = np.zeros(self.nn)
        self._cache: dict[tuple, tuple] = {}

    def _coefficients(self, theta: float):
        key = (self.enabled.tobytes(), self.r.tobytes(), self.l.tobytes(), theta)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        h = self.dt
        g = np.zeros(self.nb)
        alpha = np.zeros(self.nb)
        beta = np.zeros(self.nb)
        gamma = np.zeros(self.nb)
        delta = np.zeros(self.nb)
        res = ~self.is_cap & self.enabled & (self.l == 0)
        g[res] = 1.0 / self.r[res]
        alpha[res] = g[res]
        rl = ~self.is_cap & self.enabled & (self.l > 0)
        den = self.l[rl] / h + theta * self.r[rl]
        g[rl] = theta / den
        alpha[rl] = theta / den
        beta[rl] = (1.0 - theta) / den
        gamma[rl] = (self.l[rl] / h - (1.0 - theta) * self.r[rl]) / den
        cp = self.is_cap & self.enabled
        g[cp] = self.c[cp] / (theta * h)
        delta[cp] = -g[cp]
        gamma[cp] = -(1.0 - theta) / theta
        y = (self.incidence * g) @ self.incidence.T
        try:
            z = np.linalg.inv(y)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular nodal admittance: a node has no path to ground") from exc
        if not np.all(np.isfinite(z)) or np.linalg.cond(y) > 1e16:
            raise ValueError("singular nodal admittance: a node has no path to ground")
        hit = (g, alpha, beta, gamma, delta, z)
        if len(self._cache) >= 256:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = hit
        return hit

    def set_state(self, i: np.ndarray, u: np.ndarray, e: np.ndarray) -> None:
        self.i = np.where(self.enabled, i, 0.0)
        self.u = np.array(u, dtype=float)
        self.e = np.array(e, dtype=float)

    def step(self, e_new: np.ndarray, theta: float = 0.5, t: float = 0.0) -> None:
        g, alpha, beta, gamma, delta, z = self._coefficients(theta)
        j = alpha * e_new + beta * (self.u + self.e) + gamma * self.i + delta * self.u
        rhs = self.injection - self.incidence @ j
        v = z @ rhs
        u = self.incidence.T @ v
        i = g * u + j
        if not np.all(np.isfinite(v)):
            raise IntegrationError(int(np.flatnonzero(~np.isfinite(v))[0]), t)
        self.v, self.u, self.i, self.e = v, u, i, np.array(e_new, dtype=float)

    def kcl_residual(self) -> np.ndarray:
        """Net current leaving every node (should vanish)."""
        return self.incidence @ self.i - self.injection

    def set_rl(self, k: int, r: float, l: float) -> None:
        """Change the parameters of an ``rl`` branch, keeping its current."""
        self.r[k] = r
        self.l[k] = l

    def set_enabled(self, k: int, on: bool) -> None:
        self.enabled[k] = on
        if not on:
            self.i[k] = 0.0
