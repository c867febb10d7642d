"""Piecewise-linear current waveforms and voltage time series.

A :class:`PwlWaveform` holds ``(time, current)`` breakpoints and is
evaluated by linear interpolation, holding the first value before the
first breakpoint and the last value after the final one.

A :class:`WaveformSet` is the solver output: one voltage vector per time
step for every trivial node.  It serializes to CSV with full round-trip
precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class PwlWaveform:
    """Piecewise-linear function of time.  A single point is a DC value."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.points)
        if not pts:
            raise ValueError("PWL waveform needs at least one point")
        if pts[0][0] < 0.0:
            raise ValueError("PWL times must be non-negative")
        for (t0, _), (t1, _) in zip(pts, pts[1:]):
            if not t1 > t0:
                raise ValueError(f"PWL times must be strictly increasing ({t0!r} then {t1!r})")
        object.__setattr__(self, "points", pts)

    @classmethod
    def dc(cls, value: float) -> "PwlWaveform":
        return cls(((0.0, value),))

    @property
    def is_dc(self) -> bool:
        return len(self.points) == 1

    @property
    def times(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def eval(self, t):
        """Current at time ``t`` (scalar or array, seconds)."""
        if self.is_dc:
            if np.ndim(t) == 0:
                return self.points[0][1]
            return np.full(np.shape(t), self.points[0][1])
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(t) == 0 else out

    __call__ = eval


@dataclass
class WaveformSet:
    """Per-step trivial-node voltages.

    ``values[s, k]`` is the voltage of ``node_names[k]`` at ``times[s]``.
    ``sources`` carries the fixed source-node voltages for reference; they
    are not written to CSV.
    """

    times: np.ndarray
    node_names: tuple[str, ...]
    values: np.ndarray
    sources: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.node_names = tuple(self.node_names)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D array (steps x nodes)")
        if self.values.shape != (len(self.times), len(self.node_names)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.times)} times x {len(self.node_names)} nodes"
            )

    @classmethod
    def from_steps(cls, h: float, node_names: Sequence[str], values, sources=None) -> "WaveformSet":
        values = np.asarray(values, dtype=float)
        times = np.arange(values.shape[0]) * h
        return cls(times, tuple(node_names), values, dict(sources or {}))

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def node(self, name: str) -> np.ndarray:
        return self.values[:, self.node_names.index(name)]

    def max_abs_diff(self, other: "WaveformSet") -> float:
        """Largest absolute voltage difference, matched by node name."""
        if len(self.times) != len(other.times):
            raise ValueError("waveform sets have different step counts")
        cols = [other.node_names.index(n) for n in self.node_names]
        if not cols:
            return 0.0
        return float(np.max(np.abs(self.values - other.values[:, cols])))


def merge(sets: Iterable[WaveformSet], order: Sequence[str] | None = None) -> WaveformSet:
    """Join per-component results into one set; columns follow ``order``."""
    sets = list(sets)
    if not sets:
        raise ValueError("nothing to merge")
    times = sets[0].times
    columns: dict[str, np.ndarray] = {}
    sources: dict[str, float] = {}
    for ws in sets:
        if len(ws.times) != len(times):
            raise ValueError("cannot merge waveform sets with different step counts")
        for k, name in enumerate(ws.node_names):
            columns[name] = ws.values[:, k]
        sources.update(ws.sources)
    names = list(order) if order is not None else list(columns)
    names = [n for n in names if n in columns]
    values = np.column_stack([columns[n] for n in names]) if names else np.empty((len(times), 0))
    return WaveformSet(times, tuple(names), values, sources)


def write_csv(ws: WaveformSet, sink: IO) -> None:
    """Write ``time,<node>...`` rows, one per step, in ``repr`` precision.

    ``sink`` may be a text or a binary stream.
    """
    if not ws.node_names:
        raise ValueError("no trivial nodes to write")
    binary = isinstance(sink, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(sink, "mode", "")
    buf = io.StringIO() if binary else sink
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", *ws.node_names])
    for t, row in zip(ws.times, ws.values):
        writer.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
    if binary:
        sink.write(buf.getvalue().encode("utf-8"))


def read_csv(source: IO) -> WaveformSet:
    """Inverse of :func:`write_csv`."""
    text = source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "time":
        raise ValueError("not a waveform CSV (missing 'time' header)")
    names = tuple(rows[0][1:])
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(names) + 1)
    return WaveformSet(data[:, 0], names, data[:, 1:])
