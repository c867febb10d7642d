"""Deterministic synthetic power grids for tests and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netlist import GROUND, Circuit, Element, Tran, validate
from .waveform import PwlWaveform


@dataclass(frozen=True)
class GridSpec:
    """Rectangular resistor mesh with node capacitors and rail ties.

    Every ``via_pitch``-th boundary node (walking the perimeter from the
    top-left corner) is tied to the rail through an inductor ``l_via``, or
    through a resistor ``r_wire`` when ``l_via`` is 0.  A fraction
    ``load_density`` of the interior nodes draws a triangular current pulse
    peaking between ``load_peak/2`` and ``load_peak`` at a quarter of the
    simulated window.
    """

    rows: int = 4
    cols: int = 4
    r_wire: float = 1.0
    c_node: float = 1e-11
    l_via: float = 0.0
    via_pitch: int = 2
    vdd: float = 1.0
    load_density: float = 0.25
    load_peak: float = 1e-2
    seed: int = 0
    step: float = 1e-12
    stop: float = 40e-12

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be at least 1")
        if self.r_wire <= 0 or self.c_node <= 0:
            raise ValueError("r_wire and c_node must be positive")
        if self.l_via < 0:
            raise ValueError("l_via must be non-negative (0 disables inductors)")
        if self.via_pitch < 1:
            raise ValueError("via_pitch must be at least 1")
        if not 0.0 <= self.load_density <= 1.0:
            raise ValueError("load_density must lie in [0, 1]")
        if self.load_peak < 0:
            raise ValueError("load_peak must be non-negative")
        if self.step <= 0 or self.stop <= 0:
            raise ValueError("step and stop must be positive")


def node_name(r: int, c: int) -> str:
    return f"n{r}_{c}"


def perimeter(rows: int, cols: int) -> list[tuple[int, int]]:
    """Boundary cells clockwise from (0, 0), each listed once."""
    if rows == 1:
        return [(0, c) for c in range(cols)]
    if cols == 1:
        return [(r, 0) for r in range(rows)]
    top = [(0, c) for c in range(cols)]
    right = [(r, cols - 1) for r in range(1, rows)]
    bottom = [(rows - 1, c) for c in range(cols - 2, -1, -1)]
    left = [(r, 0) for r in range(rows - 2, 0, -1)]
    return top + right + bottom + left


def generate(spec: GridSpec) -> Circuit:
    rng = np.random.default_rng(spec.seed)
    R, C = spec.rows, spec.cols
    elems = [Element("VDD", "V", "vdd", GROUND, float(spec.vdd))]
    for r in range(R):
        for c in range(C - 1):
            elems.append(Element(f"Rh{r}_{c}", "R", node_name(r, c), node_name(r, c + 1), spec.r_wire))
    for r in range(R - 1):
        for c in range(C):
            elems.append(Element(f"Rv{r}_{c}", "R", node_name(r, c), node_name(r + 1, c), spec.r_wire))
    for r in range(R):
        for c in range(C):
            elems.append(Element(f"C{r}_{c}", "C", node_name(r, c), GROUND, spec.c_node))
    for k, (r, c) in enumerate(perimeter(R, C)):
        if k % spec.via_pitch:
            continue
        if spec.l_via > 0:
            elems.append(Element(f"Lvia{k}", "L", "vdd", node_name(r, c), spec.l_via))
        else:
            elems.append(Element(f"Rvia{k}", "R", "vdd", node_name(r, c), spec.r_wire))

    interior = [(r, c) for r in range(1, R - 1) for c in range(1, C - 1)]
    candidates = interior or [(r, c) for r in range(R) for c in range(C)]
    count = int(np.ceil(spec.load_density * len(candidates)))
    if count and spec.load_peak > 0:
        picks = sorted(rng.choice(len(candidates), size=count, replace=False))
        peaks = rng.uniform(0.5, 1.0, size=count) * spec.load_peak
        half = spec.stop / 2
        for k, peak in zip(picks, peaks):
            r, c = candidates[k]
            wf = PwlWaveform(((0.0, 0.0), (half / 2, float(peak)), (half, 0.0)))
            elems.append(Element(f"I{r}_{c}", "I", node_name(r, c), GROUND, waveform=wf))

    circuit = Circuit(tuple(elems), {}, {}, Tran(spec.step, spec.stop))
    problems = validate(circuit)
    if problems:
        raise ValueError("generated grid is invalid: " + "; ".join(map(str, problems)))
    return circuit
