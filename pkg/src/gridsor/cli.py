"""Command-line entry point.

Exit codes: 0 success, 1 input error (usage, parse, validation), 2 numerical
failure or comparison threshold exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import gridgen, oracle
from .dc import ConvergenceError, DcError
from .netlist import NetlistError, decompose, parse, serialize, validate
from .topology import RC, RLC, StencilError, build_stencils
from .transient import SolveConfig, run, simulate
from .waveform import write_csv

log = logging.getLogger("gridsor")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _omega(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 2.0:
        raise argparse.ArgumentTypeError(f"omega must lie in (0, 2), got {text}")
    return v


def _positive(kind):
    def conv(text: str):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("netlist", type=Path)
    p.add_argument("--tol", type=_positive(float), default=1e-10, help="inner-loop tolerance (V)")
    p.add_argument("--omega", type=_omega, default=1.0, help="SOR relaxation in (0, 2)")
    p.add_argument("--step", type=_positive(float), help="override .tran step (s)")
    p.add_argument("--steps", type=_positive(int), help="override number of steps")
    p.add_argument("--mode", choices=("rc", "rlc", "auto"), default="auto")
    p.add_argument("--max-inner", type=_positive(int), default=10_000)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gridsor", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="transient analysis to CSV")
    _solver_flags(p)
    p.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("check", help="check topological assumptions")
    p.add_argument("netlist", type=Path)
    p.add_argument("--dense", action="store_true", help="also report the dense positive-definiteness checks")
    p.add_argument("--step", type=_positive(float), help="step used for the dense system matrix")
    p.add_argument("--dump", type=Path, help="write each component's system matrix (MatrixMarket)")

    p = sub.add_parser("compare", help="matrix-free vs dense reference")
    _solver_flags(p)
    p.add_argument("--max-diff", type=_positive(float), default=1e-8)
    p.add_argument("--max-nodes", type=_positive(int), default=2000)

    p = sub.add_parser("gen", help="write a synthetic grid netlist")
    p.add_argument("--rows", type=_positive(int), default=4)
    p.add_argument("--cols", type=_positive(int), default=4)
    p.add_argument("--r-wire", type=_positive(float), default=gridgen.GridSpec.r_wire)
    p.add_argument("--c-node", type=_positive(float), default=gridgen.GridSpec.c_node)
    p.add_argument("--l-via", type=float, default=0.0, help="via inductance (0: resistive ties)")
    p.add_argument("--via-pitch", type=_positive(int), default=gridgen.GridSpec.via_pitch)
    p.add_argument("--vdd", type=float, default=gridgen.GridSpec.vdd)
    p.add_argument("--load-density", type=float, default=gridgen.GridSpec.load_density)
    p.add_argument("--load-peak", type=float, default=gridgen.GridSpec.load_peak)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=_positive(float), default=gridgen.GridSpec.step)
    p.add_argument("--stop", type=_positive(float), default=gridgen.GridSpec.stop)
    p.add_argument("--out", type=Path, help="netlist path (default: stdout)")
    return ap


def _load(path: Path):
    """Parse and validate; returns the circuit or raises an input error."""
    text = path.read_text()
    c = parse(text)
    return c, validate(c)


def _config(c, args) -> SolveConfig:
    cfg = SolveConfig.from_circuit(
        c, h=args.step, tol=args.tol, omega=args.omega, mode=args.mode, max_inner=args.max_inner,
    )
    if args.steps is not None:
        cfg = SolveConfig(cfg.h, args.steps, cfg.tol, cfg.omega, cfg.max_inner, cfg.mode)
    elif args.step is not None and c.tran is not None:
        cfg = SolveConfig(cfg.h, max(int(round(c.tran.stop / cfg.h)), 2), cfg.tol, cfg.omega,
                          cfg.max_inner, cfg.mode)
    return cfg


def _report_violations(violations) -> None:
    for v in violations:
        print(f"violation: {v}", file=sys.stderr)


def cmd_run(args) -> int:
    c, violations = _load(args.netlist)
    if violations:
        _report_violations(violations)
        return EXIT_INPUT
    cfg = _config(c, args)
    ws, reports = simulate(c, cfg)
    for k, rep in enumerate(reports):
        iters = rep.iterations
        print(
            f"component {k}: mode={rep.mode} steps={len(iters)} sweeps total={sum(iters)} "
            f"max/step={max(iters, default=0)} wall={rep.wall_time:.3f}s",
            file=sys.stderr,
        )
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(ws, fh)
    else:
        write_csv(ws, sys.stdout)
    return EXIT_OK


def cmd_check(args) -> int:
    c, violations = _load(args.netlist)
    parts = decompose(c) if not violations else []
    print(f"trivial nodes: {len(c.trivial_nodes)}, source nodes: {len(c.source_nodes)}, "
          f"branches: {len(c.branches)}")
    for k in (1, 2):
        bad = [v for v in violations if v.assumption == k]
        print(f"assumption {k}: {'ok' if not bad else f'{len(bad)} violation(s)'}")
        for v in bad:
            print(f"  {v}")
    if violations:
        return EXIT_INPUT
    print(f"assumption 3: ok within each of {len(parts)} component(s)")
    print(f"{len(parts)} components" if len(parts) != 1 else "1 component")
    if args.dense:
        h = args.step or (c.tran.step if c.tran else 1.0)
        for k, part in enumerate(parts):
            mode = RLC if part.has_inductors else RC
            sys_ = oracle.assemble(part, h, mode)
            rep = oracle.check_pd(sys_)
            print(f"component {k} ({sys_.n} nodes, h={h!r}):")
            for line in rep.lines():
                print(f"  {line}")
            if args.dump:
                target = args.dump if len(parts) == 1 else args.dump.with_name(
                    f"{args.dump.stem}_{k}{args.dump.suffix}")
                oracle.write_matrix_market(sys_.M, target)
                print(f"  matrix written to {target}")
    return EXIT_OK


def cmd_compare(args) -> int:
    c, violations = _load(args.netlist)
    if violations:
        _report_violations(violations)
        return EXIT_INPUT
    if len(c.trivial_nodes) > args.max_nodes:
        print(f"error: {len(c.trivial_nodes)} nodes exceeds --max-nodes {args.max_nodes}",
              file=sys.stderr)
        return EXIT_INPUT
    cfg = _config(c, args)
    worst = 0.0
    for k, part in enumerate(decompose(c)):
        mode = cfg.resolved_mode(part)
        ws, rep = run(part, cfg)
        ref = oracle.direct_transient(part, cfg)
        diff = ws.max_abs_diff(ref)
        worst = max(worst, diff)
        sys_ = oracle.assemble(part, cfg.h, mode)
        eq = oracle.gs_matrix_equivalence(sys_, build_stencils(part, cfg.h, mode))
        print(f"component {k}: mode={mode} nodes={sys_.n}")
        print(f"  max |matrix-free - dense| = {diff:.3e} V")
        print(f"  stencil/matrix max diff   = {eq:.3e} (relative {eq / np.abs(sys_.M).max():.3e})")
        print(f"  sweeps per step: {' '.join(map(str, rep.iterations))}")
        if not part.has_inductors:
            rc, _ = run(part, SolveConfig(cfg.h, cfg.s_total, cfg.tol, cfg.omega, cfg.max_inner, RC))
            rlc, _ = run(part, SolveConfig(cfg.h, cfg.s_total, cfg.tol, cfg.omega, cfg.max_inner, RLC),
                         start=(rc.values[0], rc.values[1]))
            print(f"  first- vs second-order mode max diff = {rc.max_abs_diff(rlc):.3e} V")
        else:
            try:
                oracle.literal_source_inductance(sys_)
                print("  literal source-inductance product conforms for this circuit")
            except ValueError as exc:
                print(f"  literal source-inductance product: {exc}")
    print(f"max diff {worst:.3e} V (threshold {args.max_diff:.3e})")
    return EXIT_OK if worst <= args.max_diff else EXIT_NUMERIC


def cmd_gen(args) -> int:
    try:
        spec = gridgen.GridSpec(
            rows=args.rows, cols=args.cols, r_wire=args.r_wire, c_node=args.c_node,
            l_via=args.l_via, via_pitch=args.via_pitch, vdd=args.vdd,
            load_density=args.load_density, load_peak=args.load_peak, seed=args.seed,
            step=args.step, stop=args.stop,
        )
    except ValueError as exc:
        print(f"gridsor gen: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = serialize(gridgen.generate(spec))
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "compare": cmd_compare, "gen": cmd_gen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (NetlistError, DcError, StencilError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
