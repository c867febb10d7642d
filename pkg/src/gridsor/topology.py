"""Per-node update stencils for the matrix-free solver.

For every trivial node ``i`` the backward-Euler step of the RLC grid reads

    d_i V_i(t+h) = sum_j (g_ij + h/L_ij) V_j(t+h) + d_i K_i

with ``d_i = sum_R g_ij + h sum_L 1/L_ij + C_i/h``; the sums over ``j`` on
the right run over trivial neighbours only.  ``K_i`` collects everything
already known at ``t+h``: history voltages, load-current differences and
the injection through inductors tied to source nodes.  Resistors tied to
source nodes drop out of ``K_i`` because the rail voltage is identical at
``t`` and ``t+h``.

In first-order (RC) form the same structure holds with
``d_i = sum_R g_ij + C_i/h`` and ``K_i`` built from ``C/h V(t)`` plus the
rail injection ``sum g_ij Vdd`` minus the load at ``t+h``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netlist import Circuit
from .waveform import PwlWaveform

RC = "rc_first_order"
RLC = "rlc_second_order"


class StencilError(ValueError):
    pass


@dataclass(frozen=True)
class NodeStencil:
    """Update data for one trivial node (zero-based ``index``).

    ``lower``/``upper`` hold ``(j, w_ij, g_ij)`` for trivial neighbours with
    smaller/larger index.  ``r_neighbors_t`` lists the trivial resistor
    neighbours ``(j, g_ij)`` entering the ``-sum g_ij V_j(t)`` history term.
    """

    index: int
    diag: float
    lower: tuple[tuple[int, float, float], ...]
    upper: tuple[tuple[int, float, float], ...]
    src_inject: float
    cap: float
    g_row_sum: float
    r_neighbors_t: tuple[tuple[int, float], ...]


@dataclass(frozen=True, eq=False)
class StencilSet:
    """All node stencils of one circuit component, in CSR layout.

    Row ``i`` owns entries ``indptr[i]:indptr[i+1]`` of ``indices`` (sorted
    neighbour positions), ``weight`` (``w_ij``), ``g`` (conductance),
    ``inv_l`` (inverse inductance) and ``c`` (node-to-node capacitance).
    """

    names: tuple[str, ...]
    h: float
    mode: str
    diag: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    weight: np.ndarray
    g: np.ndarray
    inv_l: np.ndarray
    c: np.ndarray
    cap: np.ndarray
    g_row_sum: np.ndarray
    inv_l_row_sum: np.ndarray
    src_inject: np.ndarray
    src_g: np.ndarray
    loads: tuple[tuple[int, PwlWaveform, float], ...]

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def stencil(self, i: int) -> NodeStencil:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        entries = [
            (int(j), float(w), float(g))
            for j, w, g in zip(self.indices[lo:hi], self.weight[lo:hi], self.g[lo:hi])
        ]
        return NodeStencil(
            index=i,
            diag=float(self.diag[i]),
            lower=tuple(e for e in entries if e[0] < i),
            upper=tuple(e for e in entries if e[0] > i),
            src_inject=float(self.src_inject[i]),
            cap=float(self.cap[i]),
            g_row_sum=float(self.g_row_sum[i]),
            r_neighbors_t=tuple((j, g) for j, _, g in entries if g != 0.0),
        )

    def _offdiag(self, coef: np.ndarray, V: np.ndarray) -> np.ndarray:
        return np.bincount(self.rows, weights=coef * V[self.indices], minlength=self.n)

    def currents(self, t) -> np.ndarray:
        """Load current drawn out of each node at time(s) ``t``.

        Scalar ``t`` gives shape ``(n,)``; an array of times gives
        ``(len(t), n)``.
        """
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((len(ts), self.n))
        for k, wf, sign in self.loads:
            out[:, k] += sign * np.asarray(wf.eval(ts))
        return out[0] if scalar else out

    def rhs(self, V_t, V_tmh, I_tph, I_t) -> np.ndarray:
        """Second-order constants ``K`` for every node (RLC mode)."""
        V_t = np.asarray(V_t, dtype=float)
        V_tmh = np.asarray(V_tmh, dtype=float)
        ch = self.cap / self.h
        num = (
            self.src_inject
            + (2.0 * ch + self.g_row_sum) * V_t
            - self._offdiag(self.g, V_t)
            - np.asarray(I_tph) + np.asarray(I_t)
            - ch * V_tmh
        )
        return num / self.diag

    def rhs_first_order(self, V_t, I_tph) -> np.ndarray:
        """First-order constants ``K`` for every node (RC mode)."""
        V_t = np.asarray(V_t, dtype=float)
        cv = self.cap * V_t - self._offdiag(self.c, V_t)
        return (cv / self.h + self.src_g - np.asarray(I_tph)) / self.diag

    def implied_matrix(self) -> np.ndarray:
        """Dense matrix with ``d_i`` on the diagonal and ``-d_i w_ij`` off it."""
        M = np.diag(self.diag.copy())
        M[self.rows, self.indices] = -self.diag[self.rows] * self.weight
        return M


def rhs_constant(s: StencilSet, i: int, V_t, V_tmh, I_tph: float, I_t: float) -> float:
    """``K_i(t+h, t, t-h)`` for node ``i`` with scalar load currents."""
    st = s.stencil(i)
    V_t = np.asarray(V_t, dtype=float)
    ch = st.cap / s.h
    hist = sum(g * V_t[j] for j, g in st.r_neighbors_t)
    num = (
        st.src_inject
        + (2.0 * ch + st.g_row_sum) * V_t[i]
        - hist
        - I_tph + I_t
        - ch * V_tmh[i]
    )
    return num / st.diag


def build_stencils(c: Circuit, h: float, mode: str = RLC) -> StencilSet:
    """Precompute node stencils of a single-component circuit for step ``h``.

    Parallel branches between one node pair are merged.  Node-to-node
    capacitors are supported only in first-order mode.
    """
    if not h > 0:
        raise StencilError(f"time step must be positive, got {h!r}")
    if mode not in (RC, RLC):
        raise StencilError(f"unknown mode {mode!r}")
    idx = c.trivial_index
    n = len(idx)
    if n == 0:
        raise StencilError("circuit has no trivial nodes")

    pair: dict[tuple[int, int], list[float]] = {}
    g_row = np.zeros(n)
    il_row = np.zeros(n)
    cap = np.zeros(n)
    src_il = np.zeros(n)
    src_g = np.zeros(n)
    loads = []

    for e in c.branches:
        ia, ib = idx.get(e.a), idx.get(e.b)
        if e.kind == "I":
            if ia is not None:
                loads.append((ia, e.waveform, 1.0))
            if ib is not None:
                loads.append((ib, e.waveform, -1.0))
            continue
        slot = {"R": 0, "L": 1, "C": 2}[e.kind]
        val = 1.0 / e.value if e.kind in "RL" else e.value
        if ia is not None and ib is not None:
            if e.kind == "C" and mode == RLC:
                raise StencilError(
                    f"capacitor {e.name} joins two trivial nodes; only node-to-ground "
                    "capacitance is supported in second-order mode"
                )
            for i, j in ((ia, ib), (ib, ia)):
                pair.setdefault((i, j), [0.0, 0.0, 0.0])[slot] += val
        for i, other in ((ia, e.b), (ib, e.a)):
            if i is None:
                continue
            if e.kind == "R":
                g_row[i] += val
            elif e.kind == "L":
                il_row[i] += val
            else:
                cap[i] += val
            if other in c.source_voltage:
                if e.kind == "R":
                    src_g[i] += val * c.source_voltage[other]
                elif e.kind == "L":
                    src_il[i] += val * c.source_voltage[other]

    if mode == RC and np.any(il_row):
        raise StencilError("first-order mode cannot handle inductors")

    if mode == RLC:
        diag = g_row + h * il_row + cap / h
    else:
        diag = g_row + cap / h
    bad = np.flatnonzero(~(diag > 0))
    if bad.size:
        raise StencilError(f"zero diagonal at node {c.trivial_nodes[bad[0]]!r}")

    keys = sorted(pair)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, _ in keys:
        indptr[i + 1] += 1
    indptr = np.cumsum(indptr)
    indices = np.array([j for _, j in keys], dtype=np.int64)
    vals = np.array([pair[k] for k in keys], dtype=float).reshape(-1, 3)
    g, inv_l, cc = vals[:, 0].copy(), vals[:, 1].copy(), vals[:, 2].copy()
    rows = np.array([i for i, _ in keys], dtype=np.int64)
    coef = g + h * inv_l if mode == RLC else g + cc / h
    weight = coef / diag[rows] if len(keys) else np.zeros(0)

    return StencilSet(
        names=tuple(c.trivial_nodes),
        h=float(h),
        mode=mode,
        diag=diag,
        indptr=indptr,
        indices=indices,
        weight=weight,
        g=g,
        inv_l=inv_l,
        c=cc,
        cap=cap,
        g_row_sum=g_row,
        inv_l_row_sum=il_row,
        src_inject=h * src_il if mode == RLC else np.zeros(n),
        src_g=src_g,
        loads=tuple(loads),
    )
