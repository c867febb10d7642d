"""Iterative DC analysis and three-step transient initialization.

DC solves sweep only the resistive network.  Nodes may be pinned at a
fixed voltage (capacitor nodes during initialization) and any node may
carry an injected current (loads, and inductor currents during
initialization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._sweep import as_order, sor_sweep
from .netlist import Circuit


class DcError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted.  ``step`` is ``None`` for DC solves."""

    def __init__(self, message: str, step: int | None = None, residual: float = float("nan"),
                 iterations: int = 0):
        super().__init__(message)
        self.step = step
        self.residual = residual
        self.iterations = iterations


@dataclass(eq=False)
class DcProblem:
    """Resistive network over the trivial nodes of one circuit.

    ``indptr/indices/g`` give trivial-trivial conductances, ``g_sum`` the
    total resistive conductance at each node (rail and ground ties
    included) and ``fixed_inj`` the sum of ``g * V`` over rail ties.
    ``injection`` is the current leaving each node through loads.
    """

    names: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray
    g: np.ndarray
    g_sum: np.ndarray
    fixed_inj: np.ndarray
    pinned: np.ndarray
    pinned_values: np.ndarray
    injection: np.ndarray

    @property
    def n(self) -> int:
        return len(self.names)

    @classmethod
    def from_circuit(cls, c: Circuit, pinned: dict[int, float] | None = None,
                     injection=None) -> "DcProblem":
        idx = c.trivial_index
        n = len(idx)
        pair: dict[tuple[int, int], float] = {}
        g_sum = np.zeros(n)
        fixed_inj = np.zeros(n)
        for e in c.branches:
            if e.kind != "R":
                continue
            g = 1.0 / e.value
            ia, ib = idx.get(e.a), idx.get(e.b)
            if ia is not None and ib is not None:
                pair[(ia, ib)] = pair.get((ia, ib), 0.0) + g
                pair[(ib, ia)] = pair.get((ib, ia), 0.0) + g
            for i, other in ((ia, e.b), (ib, e.a)):
                if i is None:
                    continue
                g_sum[i] += g
                if other in c.source_voltage:
                    fixed_inj[i] += g * c.source_voltage[other]
        keys = sorted(pair)
        counts = np.bincount(np.array([i for i, _ in keys], dtype=np.int64), minlength=n)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        mask = np.zeros(n, dtype=bool)
        values = np.zeros(n)
        for i, v in (pinned or {}).items():
            mask[i] = True
            values[i] = v
        inj = np.zeros(n) if injection is None else np.asarray(injection, dtype=float).copy()
        return cls(
            names=tuple(c.trivial_nodes),
            indptr=indptr,
            indices=np.array([j for _, j in keys], dtype=np.int64),
            g=np.array([pair[k] for k in keys], dtype=float),
            g_sum=g_sum,
            fixed_inj=fixed_inj,
            pinned=mask,
            pinned_values=values,
            injection=inj,
        )

    def kcl_residual(self, V) -> np.ndarray:
        """Current leaving each node through resistors and loads."""
        V = np.asarray(V, dtype=float)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        nb = np.bincount(rows, weights=self.g * V[self.indices], minlength=self.n)
        return self.g_sum * V - nb - self.fixed_inj + self.injection


def _dc_iterate(p: DcProblem, tol: float, omega: float, max_iter: int, guess=None):
    if not 0.0 < omega < 2.0:
        raise ValueError(f"omega must lie in (0, 2), got {omega!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    free = np.flatnonzero(~p.pinned)
    floating = free[p.g_sum[free] <= 0]
    if floating.size:
        raise DcError(f"node {p.names[floating[0]]!r} has no resistive path and is not pinned")

    if guess is None:
        start = p.pinned_values.max() if p.pinned.any() else 0.0
        start = max(start, float(np.max(p.fixed_inj / np.where(p.g_sum > 0, p.g_sum, 1.0), initial=0.0)))
        V = np.full(p.n, start)
    else:
        V = np.asarray(guess, dtype=float).copy()
    V[p.pinned] = p.pinned_values[p.pinned]
    if free.size == 0:
        return V, 0

    gs = np.where(p.g_sum > 0, p.g_sum, 1.0)
    rows = np.repeat(np.arange(p.n), np.diff(p.indptr))
    weight = p.g / gs[rows]
    K = (p.fixed_inj - p.injection) / gs
    order = as_order(free)
    delta = np.inf
    for k in range(1, max_iter + 1):
        delta = sor_sweep(order, p.indptr, p.indices, weight, K, V, omega)
        if delta < tol:
            return V, k
    raise ConvergenceError(
        f"DC iteration did not converge in {max_iter} sweeps (last update {delta:.3e} V)",
        residual=delta, iterations=max_iter,
    )


def dc_solve(p: DcProblem, tol: float = 1e-10, omega: float = 1.0, max_iter: int = 100_000,
             guess=None) -> np.ndarray:
    """Gauss-Seidel/SOR solve of the resistive network.

    Free nodes are swept in ascending order with
    ``V_i <- omega * (sum_j g_ij V_j - I_i) / sum_j g_ij + (1 - omega) * V_i``;
    iteration stops once the largest per-node update is below ``tol``.
    """
    return _dc_iterate(p, tol, omega, max_iter, guess)[0]


@dataclass
class InitState:
    """Voltages at ``t = 0`` and ``t = h`` plus element states used to get them.

    ``i_c0``/``v_c_h`` are keyed by capacitor name (current/voltage taken
    from terminal ``a`` to ``b``); ``v_l0``/``i_l_h`` by inductor name.
    """

    V0: np.ndarray
    V1: np.ndarray
    i_c0: dict[str, float]
    v_l0: dict[str, float]
    v_c_h: dict[str, float]
    i_l_h: dict[str, float]
    iterations: tuple[int, int] = (0, 0)


def _inductor_injection(c: Circuit, currents: dict[str, float]) -> np.ndarray:
    idx = c.trivial_index
    inj = np.zeros(len(idx))
    for e in c.branches:
        if e.kind != "L":
            continue
        i = currents[e.name]
        if e.a in idx:
            inj[idx[e.a]] += i
        if e.b in idx:
            inj[idx[e.b]] -= i
    return inj


def load_currents(c: Circuit, t: float) -> np.ndarray:
    """Current drawn out of each trivial node by current sources at ``t``."""
    idx = c.trivial_index
    out = np.zeros(len(idx))
    for e in c.branches:
        if e.kind != "I":
            continue
        i = e.current(t)
        if e.a in idx:
            out[idx[e.a]] += i
        if e.b in idx:
            out[idx[e.b]] -= i
    return out


def initialize(c: Circuit, h: float, tol: float = 1e-10, omega: float = 1.0,
               max_iter: int = 100_000) -> InitState:
    """Compute ``V(0)`` and ``V(h)`` from capacitor voltages and inductor currents.

    1. Capacitor nodes are held at their initial voltage and inductors act
       as current sources carrying ``i_l(0)``; a DC solve gives ``V(0)``.
       Capacitor currents follow from the KCL mismatch at the held nodes and
       inductor voltages from the node voltages.
    2. Capacitor voltages and inductor currents advance one forward step.
    3. A second DC solve with the advanced states and loads at ``t = h``
       gives ``V(h)``.

    Initial node voltages come from ``.ic V(node)``; capacitor nodes without
    one start at the rail (:attr:`Circuit.vdd`).  Inductor currents default
    to zero.
    """
    idx = c.trivial_index
    n = len(idx)
    caps = [e for e in c.branches if e.kind == "C"]
    inductors = [e for e in c.branches if e.kind == "L"]

    def node_v(name: str, V: np.ndarray) -> float:
        return V[idx[name]] if name in idx else c.fixed_voltage(name)

    held_cap = np.zeros(n)
    for e in caps:
        ia, ib = idx.get(e.a), idx.get(e.b)
        if ia is not None and ib is not None:
            if e.a in c.node_ic and e.b in c.node_ic and c.node_ic[e.a] != c.node_ic[e.b]:
                raise DcError(
                    f"capacitor {e.name} between trivial nodes has a nonzero initial "
                    "voltage; floating capacitor initial conditions are not supported"
                )
            continue
        held_cap[ia if ia is not None else ib] += e.value

    pinned0 = {
        i: c.node_ic.get(name, c.vdd)
        for name, i in idx.items() if held_cap[i] > 0
    }
    i_l0 = {e.name: c.inductor_ic.get(e.name, 0.0) for e in inductors}

    p0 = DcProblem.from_circuit(c, pinned0, load_currents(c, 0.0) + _inductor_injection(c, i_l0))
    V0, it0 = _dc_iterate(p0, tol, omega, max_iter)

    # Current into the held capacitance at each pinned node.
    ic_node = -p0.kcl_residual(V0)
    i_c0: dict[str, float] = {}
    v_c_h: dict[str, float] = {}
    pinned1 = dict(pinned0)
    for i in pinned0:
        pinned1[i] = pinned0[i] + h * ic_node[i] / held_cap[i]
    for e in caps:
        ia, ib = idx.get(e.a), idx.get(e.b)
        if ia is not None and ib is not None:
            i_c0[e.name] = 0.0
            v_c_h[e.name] = V0[ia] - V0[ib]
            continue
        i = ia if ia is not None else ib
        share = ic_node[i] * e.value / held_cap[i]
        i_c0[e.name] = share if ia is not None else -share
        v0 = node_v(e.a, V0) - node_v(e.b, V0)
        v_c_h[e.name] = v0 + h * i_c0[e.name] / e.value

    v_l0 = {e.name: node_v(e.a, V0) - node_v(e.b, V0) for e in inductors}
    i_l_h = {e.name: i_l0[e.name] + h * v_l0[e.name] / e.value for e in inductors}

    p1 = DcProblem.from_circuit(c, pinned1, load_currents(c, h) + _inductor_injection(c, i_l_h))
    V1, it1 = _dc_iterate(p1, tol, omega, max_iter, guess=V0)
    return InitState(V0, V1, i_c0, v_l0, v_c_h, i_l_h, (it0, it1))
