"""Dense reference model: incidence matrices, system matrices, direct solves.

Used to check the matrix-free path; never used by it.  Everything is
assembled from the branch-node incidence structure:

* ``A``   (m x n) branch vs trivial node, +1 at the branch's first
  terminal and -1 at its second;
* ``A_s`` (m x p) the same against source nodes;

with branches stacked resistors, capacitors, inductors, current sources.
From these ``G = A_g' diag(1/R) A_g``, ``C = A_c' diag(C) A_c``,
``L = A_l' diag(1/L) A_l``, ``G_s = A_g' diag(1/R) A_gs``,
``L_s = A_l' diag(1/L) A_ls`` and ``M = C/h + G + hL``.

Nodal KCL is ``C v' + G v + G_s v_d + A_l' i_l + A_i' I = 0`` and the
inductor law ``diag(L) i_l' = A_l v + A_ls v_d``.  Differencing the
backward-Euler form of the first equation and substituting the second
gives the per-step system

    M v(t+h) = (2C/h + G) v(t) - C/h v(t-h) - h L_s v_d - A_i' (I(t+h) - I(t)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse
from scipy.linalg import lapack
from scipy.sparse.csgraph import connected_components

from .netlist import Circuit, Element
from .topology import RC, RLC, StencilSet
from .waveform import WaveformSet

GROUP_ORDER = ("R", "C", "L", "I")


@dataclass(eq=False)
class IncidenceSet:
    A: np.ndarray
    A_s: np.ndarray
    kinds: tuple[str, ...]
    branches: tuple[Element, ...]
    trivial: tuple[str, ...]
    sources: tuple[str, ...]
    v_d: np.ndarray

    def rows(self, kind: str) -> np.ndarray:
        return np.array([k == kind for k in self.kinds], dtype=bool)

    def group(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        r = self.rows(kind)
        return self.A[r], self.A_s[r]

    def values(self, kind: str) -> np.ndarray:
        return np.array([b.value for b, k in zip(self.branches, self.kinds) if k == kind], dtype=float)

    @property
    def A_g(self):
        return self.group("R")[0]

    @property
    def A_c(self):
        return self.group("C")[0]

    @property
    def A_l(self):
        return self.group("L")[0]

    @property
    def A_i(self):
        return self.group("I")[0]

    @property
    def A_gs(self):
        return self.group("R")[1]

    @property
    def A_ls(self):
        return self.group("L")[1]

    def source_currents(self, t: float) -> np.ndarray:
        return np.array([b.current(t) for b, k in zip(self.branches, self.kinds) if k == "I"], dtype=float)


def incidence(c: Circuit) -> IncidenceSet:
    trivial = c.trivial_nodes
    sources = c.source_nodes
    ti = {n: k for k, n in enumerate(trivial)}
    si = {n: k for k, n in enumerate(sources)}
    branches = sorted(c.branches, key=lambda e: GROUP_ORDER.index(e.kind))
    m = len(branches)
    A = np.zeros((m, len(trivial)))
    A_s = np.zeros((m, len(sources)))
    for r, e in enumerate(branches):
        for node, sign in ((e.a, 1.0), (e.b, -1.0)):
            if node in ti:
                A[r, ti[node]] = sign
            elif node in si:
                A_s[r, si[node]] = sign
    v_d = np.array([c.source_voltage[s] for s in sources], dtype=float)
    return IncidenceSet(A, A_s, tuple(e.kind for e in branches), tuple(branches), trivial, sources, v_d)


@dataclass(eq=False)
class DenseSystem:
    inc: IncidenceSet
    h: float
    G: np.ndarray
    C: np.ndarray
    L: np.ndarray
    G_s: np.ndarray
    L_s: np.ndarray
    M: np.ndarray
    mode: str = RLC

    @property
    def n(self) -> int:
        return self.M.shape[0]


def assemble(c: Circuit, h: float, mode: str = RLC) -> DenseSystem:
    """Dense matrices of ``c`` for step ``h``.

    ``mode`` selects the system matrix: ``C/h + G + hL`` (second order) or
    ``C/h + G`` (first order).
    """
    inc = incidence(c)
    A_g, A_gs = inc.group("R")
    A_c, _ = inc.group("C")
    A_l, A_ls = inc.group("L")
    g = 1.0 / inc.values("R")
    cv = inc.values("C")
    il = 1.0 / inc.values("L")
    G = A_g.T @ (g[:, None] * A_g)
    C = A_c.T @ (cv[:, None] * A_c)
    L = A_l.T @ (il[:, None] * A_l)
    G_s = A_g.T @ (g[:, None] * A_gs)
    L_s = A_l.T @ (il[:, None] * A_ls)
    M = C / h + G + h * L if mode == RLC else C / h + G
    return DenseSystem(inc, float(h), G, C, L, G_s, L_s, M, mode)


def literal_source_inductance(sys: DenseSystem) -> np.ndarray:
    """``A_l diag(1/L) A_ls`` taken literally (no transpose on ``A_l``).

    Raises :class:`ValueError` when the factors do not conform, which is
    the case unless the inductor count happens to equal the node count.
    """
    A_l, A_ls = sys.inc.group("L")
    il = np.diag(1.0 / sys.inc.values("L"))
    if A_l.shape[1] != il.shape[0]:
        raise ValueError(
            f"A_l is {A_l.shape[0]}x{A_l.shape[1]} but diag(1/L) is "
            f"{il.shape[0]}x{il.shape[1]}: product undefined"
        )
    return A_l @ il @ A_ls


@dataclass
class PdReport:
    symmetric: bool
    diagonally_dominant: bool
    strict_rows: list[int]
    irreducible: bool
    components: int
    positive_definite: bool
    min_pivot: float
    nonpositive_diagonal: list[int] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return self.positive_definite

    def lines(self) -> list[str]:
        return [
            f"symmetric: {self.symmetric}",
            f"weakly diagonally dominant: {self.diagonally_dominant} "
            f"({len(self.strict_rows)} strictly dominant rows)",
            f"irreducible: {self.irreducible} ({self.components} component(s))",
            f"positive definite: {self.positive_definite} (min pivot {self.min_pivot:.6g})",
        ]


def check_pd(sys: DenseSystem) -> PdReport:
    """Symmetry, weak diagonal dominance, irreducibility and a Cholesky verdict.

    Dominance allows a few ulps of slack for balanced rows.  The matrix is
    declared positive definite when LAPACK's Cholesky succeeds with every
    pivot above ``1e-12 * max |M_ii|``.
    """
    M = sys.M
    n = M.shape[0]
    diag = np.diag(M)
    off = np.abs(M).sum(axis=1) - np.abs(diag)
    slack = 8 * np.finfo(float).eps * np.abs(diag)
    dominant = bool(np.all(diag >= 0) and np.all(np.abs(diag) + slack >= off))
    strict = [int(i) for i in np.flatnonzero(np.abs(diag) > off + slack)]

    pattern = scipy.sparse.csr_matrix((M != 0) & ~np.eye(n, dtype=bool))
    ncomp, _ = connected_components(pattern, directed=False) if n else (0, None)

    max_d = float(np.max(np.abs(diag))) if n else 0.0
    factor, info = lapack.dpotrf(M, lower=1)
    if info == 0 and n:
        pivots = np.diag(factor) ** 2
        min_pivot = float(pivots.min())
        pd = bool(min_pivot > 1e-12 * max_d)
    else:
        min_pivot = 0.0
        pd = False
    return PdReport(
        symmetric=bool(np.array_equal(M, M.T)),
        diagonally_dominant=dominant,
        strict_rows=strict,
        irreducible=ncomp == 1,
        components=int(ncomp),
        positive_definite=pd,
        min_pivot=min_pivot,
        nonpositive_diagonal=[int(i) for i in np.flatnonzero(diag <= 0)],
    )


def gs_matrix_equivalence(sys: DenseSystem, stencils: StencilSet) -> float:
    """Largest entrywise gap between ``M`` and the matrix the stencils imply."""
    if stencils.n != sys.n:
        raise ValueError(f"dimension mismatch: stencils {stencils.n}, matrix {sys.n}")
    return float(np.max(np.abs(stencils.implied_matrix() - sys.M), initial=0.0))


def write_matrix_market(M: np.ndarray, path) -> None:
    """Coordinate-format dump (1-based indices) of the nonzeros of ``M``."""
    scipy.io.mmwrite(path, scipy.sparse.coo_matrix(M), field="real", symmetry="general")


def _held_capacitance(inc: IncidenceSet) -> np.ndarray:
    A_c, _ = inc.group("C")
    cv = inc.values("C")
    single = np.count_nonzero(A_c, axis=1) == 1
    return (np.abs(A_c[single]) * cv[single, None]).sum(axis=0)


def dense_initialize(c: Circuit, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``V(0)`` and ``V(h)`` by direct solves of the held-capacitor networks."""
    inc = incidence(c)
    n = len(inc.trivial)
    sys = assemble(c, h)
    A_l, A_ls = inc.group("L")
    A_i, _ = inc.group("I")
    Lv = inc.values("L")
    held = _held_capacitance(inc)
    A_c, _ = inc.group("C")
    coupled = np.count_nonzero(A_c, axis=1) == 2
    if np.any(coupled):
        rows = np.flatnonzero(coupled)
        for r in rows:
            a, b = np.flatnonzero(A_c[r])
            na, nb = inc.trivial[a], inc.trivial[b]
            if na in c.node_ic and nb in c.node_ic and c.node_ic[na] != c.node_ic[nb]:
                raise ValueError("floating capacitor with nonzero initial voltage")
    pin = held > 0
    free = ~pin
    vpin = np.array([c.node_ic.get(name, c.vdd) for name in inc.trivial])

    def solve(vp, i_l, t):
        rhs = -(sys.G_s @ inc.v_d) - A_l.T @ i_l - A_i.T @ inc.source_currents(t)
        v = np.where(pin, vp, 0.0)
        if free.any():
            Gff = sys.G[np.ix_(free, free)]
            v[free] = np.linalg.solve(Gff, rhs[free] - sys.G[np.ix_(free, pin)] @ v[pin])
        ic = rhs - sys.G @ v
        return v, ic

    i_l0 = np.array([c.inductor_ic.get(b.name, 0.0) for b, k in zip(inc.branches, inc.kinds) if k == "L"])
    V0, ic = solve(vpin, i_l0, 0.0)
    vp1 = vpin + np.where(pin, h * ic / np.where(pin, held, 1.0), 0.0)
    v_l0 = A_l @ V0 + A_ls @ inc.v_d
    i_l1 = i_l0 + h * v_l0 / Lv if Lv.size else i_l0
    V1, _ = solve(vp1, i_l1, h)
    assert V0.shape == (n,)
    return V0, V1


def direct_transient(c: Circuit, cfg, start=None) -> WaveformSet:
    """Reference waveforms by Cholesky solves of each step's system.

    ``cfg`` is a :class:`~gridsor.transient.SolveConfig`; only ``h``,
    ``s_total`` and the resolved mode are used.  ``start`` overrides the
    initial voltages as in :func:`gridsor.transient.run`.
    """
    mode = cfg.resolved_mode(c)
    h, S = cfg.h, cfg.s_total
    sys = assemble(c, h, mode)
    inc = sys.inc
    A_i, _ = inc.group("I")
    try:
        chol = scipy.linalg.cho_factor(sys.M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"system matrix is not positive definite: {exc}") from None
    if start is None:
        V0, V1 = dense_initialize(c, h)
    else:
        V0 = np.asarray(start[0], dtype=float)
        V1 = np.asarray(start[1], dtype=float) if len(start) > 1 else None
    times = np.arange(S + 1) * h
    Is = np.array([inc.source_currents(t) for t in times]).reshape(S + 1, -1)
    V = np.empty((S + 1, sys.n))
    V[0] = V0
    Ch = sys.C / h
    if mode == RC:
        src = -(sys.G_s @ inc.v_d)
        for s in range(1, S + 1):
            V[s] = scipy.linalg.cho_solve(chol, Ch @ V[s - 1] + src - A_i.T @ Is[s])
    else:
        V[1] = V1
        A2 = 2 * Ch + sys.G
        src = -h * (sys.L_s @ inc.v_d)
        for s in range(2, S + 1):
            rhs = A2 @ V[s - 1] - Ch @ V[s - 2] + src - A_i.T @ (Is[s] - Is[s - 1])
            V[s] = scipy.linalg.cho_solve(chol, rhs)
    return WaveformSet(times, inc.trivial, V, dict(c.source_voltage))


@dataclass
class OperatingPoint:
    v: np.ndarray
    i_l: np.ndarray
    i_b: np.ndarray
    inc: IncidenceSet


def dc_operating_point(c: Circuit, t: float = 0.0) -> OperatingPoint:
    """DC solution with capacitors open and inductors shorted.

    ``i_b`` lists branch currents in incidence row order (capacitor rows
    carry zero).
    """
    inc = incidence(c)
    n = len(inc.trivial)
    sys = assemble(c, 1.0)
    A_l, A_ls = inc.group("L")
    A_i, _ = inc.group("I")
    nl = A_l.shape[0]
    K = np.zeros((n + nl, n + nl))
    K[:n, :n] = sys.G
    K[:n, n:] = A_l.T
    K[n:, :n] = A_l
    I = inc.source_currents(t)
    rhs = np.concatenate([-(sys.G_s @ inc.v_d) - A_i.T @ I, -(A_ls @ inc.v_d)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    v, i_l = sol[:n], sol[n:]
    A_g, A_gs = inc.group("R")
    i_g = (A_g @ v + A_gs @ inc.v_d) / inc.values("R")
    i_b = np.zeros(len(inc.kinds))
    i_b[inc.rows("R")] = i_g
    i_b[inc.rows("L")] = i_l
    i_b[inc.rows("I")] = I
    return OperatingPoint(v, i_l, i_b, inc)
