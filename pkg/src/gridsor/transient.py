"""Matrix-free transient analysis by Gauss-Seidel / SOR sweeps.

Second-order mode advances the differenced nodal recurrence, which needs
voltages at the two previous steps.  First-order mode advances the plain
backward-Euler RC recurrence and needs only one.  Both solve each step's
linear system by sweeping node stencils until the largest per-node update
drops below the tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ._sweep import as_order, gs_sweep, sor_sweep
from .dc import ConvergenceError, initialize
from .netlist import Circuit
from .topology import RC, RLC, StencilSet, build_stencils
from .waveform import WaveformSet

AUTO = "auto"
MODES = (RC, RLC, AUTO)
MODE_ALIASES = {"rc": RC, "rlc": RLC, "auto": AUTO}

SweepHook = Callable[[int, int, np.ndarray], None]


@dataclass(frozen=True)
class SolveConfig:
    h: float
    s_total: int
    tol: float = 1e-10
    omega: float = 1.0
    max_inner: int = 10_000
    mode: str = AUTO

    def __post_init__(self):
        object.__setattr__(self, "mode", MODE_ALIASES.get(self.mode, self.mode))
        if not self.h > 0:
            raise ValueError(f"step h must be positive, got {self.h!r}")
        if int(self.s_total) != self.s_total or self.s_total < 2:
            raise ValueError(f"s_total must be an integer >= 2, got {self.s_total!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega!r}")
        if self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_circuit(cls, c: Circuit, **overrides) -> "SolveConfig":
        """Take ``h`` and the step count from the circuit's ``.tran``."""
        kw = {}
        if c.tran is not None:
            kw = {"h": c.tran.step, "s_total": c.tran.n_steps}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def resolved_mode(self, c: Circuit) -> str:
        if self.mode == AUTO:
            return RLC if c.has_inductors else RC
        return self.mode


@dataclass
class SolveReport:
    mode: str
    iterations: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    V0: np.ndarray | None = None
    V1: np.ndarray | None = None
    init_iterations: tuple[int, int] = (0, 0)

    @property
    def total_iterations(self) -> int:
        return int(sum(self.iterations))


def step_update(stencils: StencilSet, V_new: np.ndarray, K: np.ndarray, omega: float = 1.0) -> float:
    """One ascending SOR sweep over all nodes, in place.  Returns the largest update."""
    return sor_sweep(as_order(stencils.n), stencils.indptr, stencils.indices, stencils.weight,
                     K, V_new, omega)


def gauss_seidel_update(stencils: StencilSet, V_new: np.ndarray, K: np.ndarray) -> float:
    """Plain Gauss-Seidel sweep (no relaxation), in place."""
    return gs_sweep(as_order(stencils.n), stencils.indptr, stencils.indices, stencils.weight,
                    K, V_new)


def solve_step(stencils: StencilSet, V: np.ndarray, K: np.ndarray, omega: float, tol: float,
               max_inner: int, step: int = 0, on_sweep: SweepHook | None = None,
               plain_gs: bool = False) -> tuple[int, float]:
    """Sweep until the largest update is below ``tol``; returns (sweeps, last update)."""
    order = as_order(stencils.n)
    args = (order, stencils.indptr, stencils.indices, stencils.weight, K, V)
    delta = np.inf
    for k in range(1, max_inner + 1):
        delta = gs_sweep(*args) if plain_gs else sor_sweep(*args, omega)
        if on_sweep is not None:
            on_sweep(step, k, V)
        if delta < tol:
            return k, delta
    raise ConvergenceError(
        f"step {step}: inner iteration did not converge in {max_inner} sweeps "
        f"(last update {delta:.3e} V)",
        step=step, residual=delta, iterations=max_inner,
    )


def run(c: Circuit, cfg: SolveConfig, start: tuple[np.ndarray, np.ndarray] | None = None,
        on_sweep: SweepHook | None = None, plain_gs: bool = False,
        zero_guess: bool = False) -> tuple[WaveformSet, SolveReport]:
    """Transient solve of a single-component circuit.

    ``start`` overrides the initial voltages: ``(V0, V1)`` in second-order
    mode, ``(V0, ...)`` in first-order mode where only ``V0`` is used.
    ``zero_guess`` starts every inner loop from zeros instead of the
    previous step.
    """
    mode = cfg.resolved_mode(c)
    if mode == RC:
        return run_rc(c, cfg, start=start, on_sweep=on_sweep, plain_gs=plain_gs,
                      zero_guess=zero_guess)
    return _run_second_order(c, replace(cfg, mode=RLC), start, on_sweep, plain_gs, zero_guess)


def _run_second_order(c, cfg, start, on_sweep, plain_gs, zero_guess):
    t0 = time.perf_counter()
    st = build_stencils(c, cfg.h, RLC)
    report = SolveReport(RLC)
    if start is None:
        init = initialize(c, cfg.h, cfg.tol, cfg.omega)
        V0, V1 = init.V0, init.V1
        report.init_iterations = init.iterations
    else:
        V0, V1 = (np.asarray(v, dtype=float) for v in start[:2])
    report.V0, report.V1 = V0.copy(), V1.copy()

    S = cfg.s_total
    times = np.arange(S + 1) * cfg.h
    I = st.currents(times)
    V = np.empty((S + 1, st.n))
    V[0], V[1] = V0, V1
    for s in range(2, S + 1):
        K = st.rhs(V[s - 1], V[s - 2], I[s], I[s - 1])
        x = np.zeros(st.n) if zero_guess else V[s - 1].copy()
        k, delta = solve_step(st, x, K, cfg.omega, cfg.tol, cfg.max_inner, s, on_sweep, plain_gs)
        V[s] = x
        report.iterations.append(k)
        report.residuals.append(delta)
    report.wall_time = time.perf_counter() - t0
    return WaveformSet(times, st.names, V, dict(c.source_voltage)), report


def run_rc(c: Circuit, cfg: SolveConfig, start=None, on_sweep: SweepHook | None = None,
           plain_gs: bool = False, zero_guess: bool = False) -> tuple[WaveformSet, SolveReport]:
    """First-order backward-Euler solve of an inductor-free circuit."""
    if c.has_inductors:
        raise ValueError("first-order mode requires an inductor-free circuit")
    t0 = time.perf_counter()
    st = build_stencils(c, cfg.h, RC)
    report = SolveReport(RC)
    if start is None:
        init = initialize(c, cfg.h, cfg.tol, cfg.omega)
        V0 = init.V0
        report.init_iterations = init.iterations
    else:
        V0 = np.asarray(start[0], dtype=float)
    report.V0 = V0.copy()

    S = cfg.s_total
    times = np.arange(S + 1) * cfg.h
    I = st.currents(times)
    V = np.empty((S + 1, st.n))
    V[0] = V0
    for s in range(1, S + 1):
        K = st.rhs_first_order(V[s - 1], I[s])
        x = np.zeros(st.n) if zero_guess else V[s - 1].copy()
        k, delta = solve_step(st, x, K, cfg.omega, cfg.tol, cfg.max_inner, s, on_sweep, plain_gs)
        V[s] = x
        report.iterations.append(k)
        report.residuals.append(delta)
    report.V1 = V[1].copy()
    report.wall_time = time.perf_counter() - t0
    return WaveformSet(times, st.names, V, dict(c.source_voltage)), report


def simulate(c: Circuit, cfg: SolveConfig, workers: int | None = None
             ) -> tuple[WaveformSet, list[SolveReport]]:
    """Decompose ``c``, solve components independently and merge the results.

    Columns of the merged set follow the netlist's node order.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .netlist import decompose
    from .waveform import merge

    parts = decompose(c)
    if not parts:
        raise ValueError("circuit has no trivial nodes")
    if len(parts) == 1 or workers == 1:
        results = [run(p, cfg) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda p: run(p, cfg), parts))
    merged = merge((ws for ws, _ in results), order=c.trivial_nodes)
    merged.sources = dict(c.source_voltage)
    return merged, [r for _, r in results]
