"""Topology-based Gauss-Seidel/SOR transient analysis of RC/RLC power grids."""

from .dc import ConvergenceError, DcProblem, InitState, dc_solve, initialize
from .gridgen import GridSpec, generate
from .netlist import Circuit, NetlistError, Violation, decompose, parse, serialize, validate
from .topology import RC, RLC, StencilSet, build_stencils, rhs_constant
from .transient import SolveConfig, SolveReport, run, run_rc, simulate, step_update
from .waveform import PwlWaveform, WaveformSet, read_csv, write_csv

__all__ = [
    "Circuit", "ConvergenceError", "DcProblem", "GridSpec", "InitState", "NetlistError",
    "PwlWaveform", "RC", "RLC", "SolveConfig", "SolveReport", "StencilSet", "Violation",
    "WaveformSet", "build_stencils", "dc_solve", "decompose", "generate", "initialize",
    "parse", "read_csv", "rhs_constant", "run", "run_rc", "serialize", "simulate",
    "step_update", "validate", "write_csv",
]
