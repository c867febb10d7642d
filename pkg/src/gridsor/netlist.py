"""SPICE-subset netlist: parsing, serialization, topology checks, decomposition.

Grammar (one element per line, ``*`` comment lines, optional ``.end``)::

    V<name> <node+> 0 <volts>
    R<name> <a> <b> <ohms>
    C<name> <a> <b> <farads>
    L<name> <a> <b> <henries>
    I<name> <a> <b> <amps>
    I<name> <a> <b> PWL(<t0> <i0> <t1> <i1> ...)
    .ic V(<node>)=<volts> I(L<name>)=<amps> ...
    .tran <step> <stop>

Node ``0`` is ground.  Positive terminals of ``V`` elements are *source*
nodes; every other non-ground node is a *trivial* node.  Current sources
draw current from ``a`` to ``b`` through the source.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .waveform import PwlWaveform

log = logging.getLogger(__name__)

GROUND = "0"
KINDS = ("V", "R", "C", "L", "I")
PASSIVE = ("R", "C", "L")

_SUFFIXES = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3,
    "k": 1e3, "meg": 1e6, "g": 1e9, "t": 1e12,
}
_NUMBER_RE = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkgt])?$", re.IGNORECASE
)
_IC_RE = re.compile(r"\s*([VvIi])\(\s*([^()\s]+)\s*\)\s*=\s*(\S+)")
_PWL_RE = re.compile(r"^PWL\s*\((.*)\)\s*$", re.IGNORECASE)


class NetlistError(ValueError):
    """Malformed netlist text.  ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        self.message = message
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


def parse_value(text: str) -> float:
    """Parse a number with an optional engineering suffix (``1k``, ``2.5meg``, ``1e-12``)."""
    m = _NUMBER_RE.match(text.strip())
    if not m:
        raise ValueError(f"invalid number {text!r}")
    value = float(m.group(1))
    if m.group(2):
        value *= _SUFFIXES[m.group(2).lower()]
    return value


@dataclass(frozen=True)
class Element:
    name: str
    kind: str
    a: str
    b: str
    value: float | None = None
    waveform: PwlWaveform | None = None

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.a, self.b)

    def current(self, t):
        if self.kind != "I":
            raise TypeError(f"{self.name} is not a current source")
        return self.waveform.eval(t)


@dataclass(frozen=True)
class Tran:
    step: float
    stop: float

    @property
    def n_steps(self) -> int:
        return max(int(round(self.stop / self.step)), 0)


@dataclass(frozen=True)
class NodeRef:
    """``index`` is 1-based within the node's kind; ground has index 0."""

    name: str
    kind: str
    index: int


@dataclass(frozen=True)
class Violation:
    assumption: int
    subject: str
    detail: str

    def __str__(self):
        return f"assumption {self.assumption} violated by {self.subject}: {self.detail}"


@dataclass(frozen=True)
class Circuit:
    elements: tuple[Element, ...]
    node_ic: dict[str, float] = field(default_factory=dict)
    inductor_ic: dict[str, float] = field(default_factory=dict)
    tran: Tran | None = None

    @cached_property
    def branches(self) -> tuple[Element, ...]:
        """Every element that is not a voltage source."""
        return tuple(e for e in self.elements if e.kind != "V")

    @cached_property
    def voltage_sources(self) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if e.kind == "V")

    @cached_property
    def source_voltage(self) -> dict[str, float]:
        return {v.a: v.value for v in self.voltage_sources}

    @property
    def sources(self) -> list[tuple[str, float]]:
        return list(self.source_voltage.items())

    @cached_property
    def node_names(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for e in self.elements:
            seen.setdefault(e.a)
            seen.setdefault(e.b)
        return tuple(seen)

    @cached_property
    def trivial_nodes(self) -> tuple[str, ...]:
        src = self.source_voltage
        return tuple(n for n in self.node_names if n != GROUND and n not in src)

    @cached_property
    def source_nodes(self) -> tuple[str, ...]:
        return tuple(n for n in self.node_names if n in self.source_voltage)

    @cached_property
    def trivial_index(self) -> dict[str, int]:
        """Zero-based position of each trivial node (sweep order)."""
        return {n: k for k, n in enumerate(self.trivial_nodes)}

    @cached_property
    def nodes(self) -> tuple[NodeRef, ...]:
        refs = []
        triv, srcs = self.trivial_index, {n: k for k, n in enumerate(self.source_nodes)}
        for n in self.node_names:
            if n == GROUND:
                refs.append(NodeRef(n, "ground", 0))
            elif n in srcs:
                refs.append(NodeRef(n, "source", srcs[n] + 1))
            else:
                refs.append(NodeRef(n, "trivial", triv[n] + 1))
        return tuple(refs)

    def is_fixed(self, node: str) -> bool:
        return node == GROUND or node in self.source_voltage

    def fixed_voltage(self, node: str) -> float:
        return 0.0 if node == GROUND else self.source_voltage[node]

    @property
    def has_inductors(self) -> bool:
        return any(e.kind == "L" for e in self.elements)

    @property
    def vdd(self) -> float:
        """Rail used for default capacitor precharge (largest source voltage)."""
        return max(self.source_voltage.values(), default=0.0)

    def element(self, name: str) -> Element:
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _value(tok: str, lineno: int, col: int) -> float:
    try:
        return parse_value(tok)
    except ValueError:
        raise NetlistError(f"invalid number {tok!r}", lineno, col) from None


def _parse_pwl(text: str, lineno: int, col: int) -> PwlWaveform:
    m = _PWL_RE.match(text)
    if not m:
        raise NetlistError(f"malformed PWL specification {text!r}", lineno, col)
    parts = m.group(1).replace(",", " ").split()
    if not parts or len(parts) % 2:
        raise NetlistError("PWL needs an even, non-zero count of time/value numbers", lineno, col)
    nums = [_value(p, lineno, col) for p in parts]
    try:
        return PwlWaveform(tuple(zip(nums[::2], nums[1::2])))
    except ValueError as exc:
        raise NetlistError(str(exc), lineno, col) from None


def parse(text: str) -> Circuit:
    """Parse netlist text into a :class:`Circuit`.

    Raises :class:`NetlistError` on syntax errors, duplicate element names,
    non-positive R/C/L values, node kind conflicts and a missing ``.tran``.
    """
    elements: list[Element] = []
    where: dict[str, int] = {}
    node_ic: dict[str, float] = {}
    inductor_ic: dict[str, float] = {}
    ic_lines: list[tuple[str, str, int, int]] = []
    tran: Tran | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        stripped = line.strip()
        if not stripped or stripped.startswith("*"):
            continue
        toks = _tokens(line)
        head, hcol = toks[0]
        if head.startswith("."):
            directive = head.lower()
            if directive == ".end":
                break
            if directive == ".tran":
                if len(toks) != 3:
                    raise NetlistError(".tran expects <step> <stop>", lineno, hcol)
                step = _value(toks[1][0], lineno, toks[1][1])
                stop = _value(toks[2][0], lineno, toks[2][1])
                if step <= 0 or stop <= 0:
                    raise NetlistError(".tran step and stop must be positive", lineno, hcol)
                tran = Tran(step, stop)
            elif directive == ".ic":
                rest = line[hcol - 1 + len(head):]
                pos = 0
                while rest[pos:].strip():
                    m = _IC_RE.match(rest, pos)
                    if not m:
                        col = hcol + len(head) + pos + (len(rest[pos:]) - len(rest[pos:].lstrip()))
                        raise NetlistError("expected V(<node>)=<volts> or I(<inductor>)=<amps>", lineno, col)
                    vcol = hcol + len(head) + m.start(3)
                    val = _value(m.group(3), lineno, vcol)
                    ncol = hcol + len(head) + m.start(2)
                    ic_lines.append((m.group(1).upper(), m.group(2), lineno, ncol))
                    if m.group(1).upper() == "V":
                        node_ic[m.group(2)] = val
                    else:
                        inductor_ic[m.group(2)] = val
                    pos = m.end()
            else:
                raise NetlistError(f"unsupported directive {head!r}", lineno, hcol)
            continue

        kind = head[0].upper()
        if kind not in KINDS:
            raise NetlistError(f"unknown element type {head[0]!r}", lineno, hcol)
        if len(toks) < 4:
            raise NetlistError(f"element {head} needs two nodes and a value", lineno, len(line) + 1)
        if head in where:
            raise NetlistError(f"duplicate element name {head!r} (first on line {where[head]})", lineno, hcol)
        (a, acol), (b, bcol) = toks[1], toks[2]
        if a == b:
            raise NetlistError(f"element {head} connects node {a!r} to itself", lineno, bcol)
        vtok, vcol = toks[3]
        waveform = None
        value = None
        if kind == "I":
            rest = line[vcol - 1:].strip()
            if rest.upper().startswith("PWL"):
                waveform = _parse_pwl(rest, lineno, vcol)
            else:
                if len(toks) != 4:
                    raise NetlistError("unexpected text after current value", lineno, toks[4][1])
                waveform = PwlWaveform.dc(_value(vtok, lineno, vcol))
        else:
            if len(toks) != 4:
                raise NetlistError(f"unexpected text after value of {head}", lineno, toks[4][1])
            value = _value(vtok, lineno, vcol)
            if kind in PASSIVE and value <= 0:
                raise NetlistError(f"{head} value must be positive, got {vtok}", lineno, vcol)
            if kind == "V" and a == GROUND:
                raise NetlistError(f"voltage source {head} has ground as its positive terminal", lineno, acol)
        elements.append(Element(head, kind, a, b, value, waveform))
        where[head] = lineno

    if not elements:
        raise NetlistError("no elements")

    positive: dict[str, str] = {}
    for e in elements:
        if e.kind != "V":
            continue
        if e.a in positive:
            raise NetlistError(
                f"node {e.a!r} is driven by both {positive[e.a]} and {e.name}", where[e.name]
            )
        positive[e.a] = e.name
    for e in elements:
        if e.kind == "V" and e.b != GROUND and e.b in positive:
            raise NetlistError(
                f"node {e.b!r} is both a source node ({positive[e.b]}) and the negative "
                f"terminal of {e.name}",
                where[e.name],
            )

    names = {n for e in elements for n in e.nodes}
    inductors = {e.name for e in elements if e.kind == "L"}
    for kind, target, lineno, col in ic_lines:
        if kind == "V" and target not in names:
            raise NetlistError(f".ic refers to unknown node {target!r}", lineno, col)
        if kind == "I" and target not in inductors:
            raise NetlistError(f".ic refers to unknown inductor {target!r}", lineno, col)

    if tran is None:
        raise NetlistError("missing .tran directive")
    return Circuit(tuple(elements), node_ic, inductor_ic, tran)


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize(c: Circuit) -> str:
    """Render ``c`` as netlist text that :func:`parse` maps back to ``c``."""
    lines = []
    for e in c.elements:
        if e.kind == "I":
            if e.waveform.is_dc:
                val = _fmt(e.waveform.points[0][1])
            else:
                val = "PWL(" + " ".join(f"{_fmt(t)} {_fmt(v)}" for t, v in e.waveform.points) + ")"
        else:
            val = _fmt(e.value)
        lines.append(f"{e.name} {e.a} {e.b} {val}")
    for node, v in c.node_ic.items():
        lines.append(f".ic V({node})={_fmt(v)}")
    for name, i in c.inductor_ic.items():
        lines.append(f".ic I({name})={_fmt(i)}")
    if c.tran is not None:
        lines.append(f".tran {_fmt(c.tran.step)} {_fmt(c.tran.stop)}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def _trivial_graph(c: Circuit) -> tuple[int, np.ndarray]:
    """Connected components over trivial nodes joined by R/C/L branches."""
    idx = c.trivial_index
    rows, cols = [], []
    for e in c.branches:
        if e.kind in PASSIVE and e.a in idx and e.b in idx:
            rows.append(idx[e.a])
            cols.append(idx[e.b])
    n = len(idx)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(graph, directed=False)


def validate(c: Circuit) -> list[Violation]:
    """Check the topological assumptions; returns every violation found."""
    out: list[Violation] = []
    neg_nodes = set()
    for v in c.voltage_sources:
        if v.b != GROUND:
            out.append(Violation(1, v.name, f"negative terminal is {v.b!r}, not ground"))
            neg_nodes.add(v.b)
    for e in c.branches:
        bad = [n for n in e.nodes if n in neg_nodes]
        if bad:
            out.append(Violation(1, e.name, f"touches non-ground negative terminal {bad[0]!r}"))

    triv = c.trivial_nodes
    if not triv:
        out.append(Violation(2, "circuit", "no trivial nodes"))
        return out
    if not c.branches:
        out.append(Violation(2, "circuit", "no branches besides voltage sources"))

    passive_deg = dict.fromkeys(triv, 0)
    tied = dict.fromkeys(triv, False)
    for e in c.branches:
        if e.kind not in PASSIVE:
            continue
        for n, other in ((e.a, e.b), (e.b, e.a)):
            if n in passive_deg:
                passive_deg[n] += 1
                if c.is_fixed(other):
                    tied[n] = True
    for n in triv:
        if n in neg_nodes:
            continue
        if passive_deg[n] == 0:
            out.append(Violation(2, n, "only current sources (or nothing) are attached"))

    # A component with no R/C/L tie to ground or a source has no strictly
    # dominant row, so its system matrix is singular.
    ncomp, labels = _trivial_graph(c)
    for k in range(ncomp):
        members = [triv[i] for i in np.flatnonzero(labels == k)]
        if any(passive_deg[n] == 0 for n in members) or any(n in neg_nodes for n in members):
            continue
        if not any(tied[n] for n in members):
            out.append(Violation(2, members[0], f"component of {len(members)} node(s) has no R/C/L path to ground or a source"))
    return out


def decompose(c: Circuit) -> list[Circuit]:
    """Split ``c`` into independent sub-circuits (one per trivial-node component).

    Trivial nodes are connected only through R/C/L branches between trivial
    nodes; sharing a source node does not join components.  A current source
    bridging two components is split, with ground standing in for the far
    end in each half.  Branches touching no trivial node are dropped.
    """
    triv = c.trivial_nodes
    if not triv:
        return []
    ncomp, labels = _trivial_graph(c)
    comp_of = {n: int(labels[i]) for i, n in enumerate(triv)}
    first = {}
    for n in triv:
        first.setdefault(comp_of[n], len(first))
    order = sorted(range(ncomp), key=lambda k: first[k])

    for e in c.branches:
        if e.a not in comp_of and e.b not in comp_of:
            log.warning("dropping %s: both terminals are fixed nodes", e.name)

    parts: list[list[Element]] = [[] for _ in range(ncomp)]
    used_sources: list[set[str]] = [set() for _ in range(ncomp)]
    for e in c.branches:
        for n in e.nodes:
            if n in comp_of and e.a in c.source_voltage:
                used_sources[comp_of[n]].add(e.a)
            if n in comp_of and e.b in c.source_voltage:
                used_sources[comp_of[n]].add(e.b)

    for e in c.elements:
        if e.kind == "V":
            for k in range(ncomp):
                if e.a in used_sources[k]:
                    parts[k].append(e)
            continue
        ks = sorted({comp_of[n] for n in e.nodes if n in comp_of})
        for k in ks:
            elem = e
            if len(ks) > 1:
                a = e.a if comp_of.get(e.a) == k else GROUND
                b = e.b if comp_of.get(e.b) == k else GROUND
                elem = Element(e.name, e.kind, a, b, e.value, e.waveform)
            parts[k].append(elem)

    subs = []
    for k in order:
        members = {n for n in triv if comp_of[n] == k}
        inds = {e.name for e in parts[k] if e.kind == "L"}
        subs.append(
            Circuit(
                tuple(parts[k]),
                {n: v for n, v in c.node_ic.items() if n in members},
                {n: v for n, v in c.inductor_ic.items() if n in inds},
                c.tran,
            )
        )
    return subs
