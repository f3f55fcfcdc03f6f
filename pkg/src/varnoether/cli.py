"""Command-line entry point: ``varnoether derive|check|charge|simulate|verify``.

Every command builds one document (nested dicts and lists of strings and
numbers) and renders it either as indented ``key: value`` text or as JSON,
so the two formats always carry the same content.

Exit codes: 0 success, 1 property or symmetry failure, 2 usage or I/O
error, 3 derivation error, 4 integration error.
"""

from __future__ import annotations

import argparse
import io
import json
import sys as _sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import corpus
from .dynamics import (
    ChargeEvaluationError,
    IntegrationError,
    assemble_ode,
    integrate,
    monitor,
    write_csv,
)
from .model import Generator, ModelError, parse_initial_state, parse_system
from .prolongation import (
    SingularMassMatrix,
    determinant,
    euler_lagrange,
    mass_matrix,
    prolong,
    variational_equations_direct,
)
from .symbolic import is_zero, render
from .symbolic.numeric import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS
from .symmetry import (
    Charge,
    check_classical_invariance,
    check_invariance,
    classical_applicable,
    classical_charge,
    extended_charge,
)
from .verify import PROPERTIES, CorpusSystem, SuiteConfig, run_suite

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DERIVATION = 3
EXIT_INTEGRATION = 4

DRIFT_TOL = 1e-6


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- loading -----------------------------------------------------------------


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot open {path}: {exc.strerror or exc}", EXIT_USAGE) from None


def load(system: str, init: Optional[str] = None, need_init: bool = False) -> CorpusSystem:
    """Resolve ``system`` as a file, falling back to a bundled corpus name."""
    p = Path(system)
    if not p.exists() and system in corpus.NAMES:
        text = corpus.read(system)
        init_text = corpus.read(system, ".json")
        origin = system
    else:
        text = _read(p)
        sibling = p.with_suffix(".json")
        init_text = _read(sibling) if init is None and sibling.exists() else None
        origin = str(p)
    if init is not None:
        init_text = _read(Path(init))
    try:
        sysdef, gens = parse_system(text)
    except ModelError as exc:
        raise CliError(f"{origin}:{exc}", EXIT_USAGE) from None
    state = None
    if init_text is not None:
        try:
            state = parse_initial_state(init_text, sysdef)
        except ModelError as exc:
            raise CliError(f"{init or 'initial state'}:{exc}", EXIT_USAGE) from None
    elif need_init:
        raise CliError(f"no initial state for {origin} (use --init)", EXIT_USAGE)
    return CorpusSystem(sysdef.name, sysdef, gens, state)


def select_generators(cs: CorpusSystem, names: Sequence[str]) -> List[Generator]:
    if not names:
        return list(cs.generators)
    table = {g.name: g for g in cs.generators}
    unknown = [n for n in names if n not in table]
    if unknown:
        raise CliError(f"unknown generator {unknown[0]} in system {cs.name}", EXIT_USAGE)
    return [table[n] for n in names]


def _zero_opts(args) -> dict:
    tol = DEFAULT_TOL if args.tol is None else args.tol
    return {"trials": DEFAULT_TRIALS, "tol": tol, "seed": args.seed}


# -- commands ------------------------------------------------------------------


def cmd_derive(args) -> tuple:
    cs = load(args.system, args.init)
    sysdef = cs.system
    mass = mass_matrix(sysdef)
    det = determinant(mass)
    if is_zero(det, seed=args.seed).verdict.is_zero:
        raise CliError(f"singular mass matrix: det M = {render(det)} vanishes identically", EXIT_DERIVATION)
    try:
        el = euler_lagrange(sysdef)
        var = variational_equations_direct(sysdef)
    except SingularMassMatrix as exc:
        raise CliError(f"singular mass matrix: {exc}", EXIT_DERIVATION) from None
    doc = {
        "system": sysdef.name,
        "gamma": render(prolong(sysdef).gamma),
        "euler_lagrange": {c: render(r) for c, r in zip(sysdef.coords, el.residuals)},
        "variational": {c: render(r) for c, r in zip(sysdef.coords, var.residuals)},
        "mass_matrix": [[render(x) for x in row] for row in mass],
    }
    return doc, EXIT_OK


def _report_doc(rep) -> dict:
    doc = {"verdict": str(rep.verdict), "residual": render(rep.residual)}
    if rep.witness is not None:
        doc["witness"] = {render(s): v for s, v in sorted(rep.witness.items())}
        doc["max_abs"] = rep.max_abs
    return doc


def cmd_check(args) -> tuple:
    cs = load(args.system, args.init)
    gamma = prolong(cs.system)
    opts = _zero_opts(args)
    reports = {}
    ok = True
    for g in select_generators(cs, args.generator):
        rep = check_invariance(gamma, g, **opts)
        ok &= rep.is_symmetry
        reports[g.name] = _report_doc(rep)
    return {"system": cs.name, "generators": reports}, EXIT_OK if ok else EXIT_FAILURE


def charges_for(cs: CorpusSystem, g: Generator, opts: dict, force: bool) -> List[Charge]:
    """Classical (when applicable) and extended charges of ``g``."""
    gamma = prolong(cs.system)
    rep = check_invariance(gamma, g, **opts)
    out = []
    if classical_applicable(cs.system, g):
        crep = check_classical_invariance(cs.system, g, **opts)
        if crep.is_symmetry or force:
            out.append(classical_charge(cs.system, g, force=force, report=crep))
    if rep.is_symmetry or force:
        out.append(extended_charge(gamma, g, force=force, report=rep))
    return out


def cmd_charge(args) -> tuple:
    cs = load(args.system, args.init)
    opts = _zero_opts(args)
    gamma = prolong(cs.system)
    doc = {}
    code = EXIT_OK
    for g in select_generators(cs, args.generator):
        rep = check_invariance(gamma, g, **opts)
        if not rep.is_symmetry and not args.force:
            doc[g.name] = {"error": f"not a symmetry ({rep.verdict}); use --force to emit anyway"}
            code = EXIT_FAILURE
            continue
        entry = {}
        for c in charges_for(cs, g, opts, args.force):
            entry[c.kind] = render(c.expr) if c.verified else {"expr": render(c.expr), "tag": "unverified"}
        doc[g.name] = entry
    return {"system": cs.name, "charges": doc}, code


def cmd_simulate(args) -> tuple:
    cs = load(args.system, args.init, need_init=True)
    # --tol is the drift tolerance here; the symmetry checks keep the default
    opts = {"trials": DEFAULT_TRIALS, "tol": DEFAULT_TOL, "seed": args.seed}
    charges = []
    for g in select_generators(cs, args.generator):
        for c in charges_for(cs, g, opts, force=False):
            charges.append(Charge(c.label, c.expr, c.kind))
    tol = DRIFT_TOL if args.tol is None else args.tol
    try:
        ode = assemble_ode(cs.system)
        traj = integrate(ode, cs.init, args.t_end, args.dt, charges)
        drifts = monitor(traj, charges)
    except IntegrationError as exc:
        raise CliError(f"integration failed: {exc}", EXIT_INTEGRATION) from None
    except ChargeEvaluationError as exc:
        raise CliError(str(exc), EXIT_INTEGRATION) from None
    except SingularMassMatrix as exc:
        raise CliError(f"singular mass matrix: {exc}", EXIT_DERIVATION) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    ok = all(d.passes(tol) for d in drifts)
    doc = {
        "system": cs.name,
        "t0": cs.init.t0,
        "t_end": args.t_end,
        "h": args.dt,
        "steps": traj.steps,
        "tolerance": tol,
        "drift": {
            d.name: {"initial": d.initial, "max_drift": d.max_drift, "relative_drift": d.relative_drift, "passed": d.passes(tol)}
            for d in drifts
        },
    }
    return doc, (EXIT_OK if ok else EXIT_FAILURE), traj


def cmd_verify(args) -> tuple:
    if args.only and args.only not in PROPERTIES:
        raise CliError(f"unknown property {args.only}; choose from {', '.join(PROPERTIES)}", EXIT_USAGE)
    systems = [load(args.system)] if args.system else [load(n) for n in corpus.NAMES]
    cfg = SuiteConfig(seed=args.seed, tol=DEFAULT_TOL if args.tol is None else args.tol)
    try:
        results = run_suite(systems, [args.only] if args.only else None, cfg)
    except IntegrationError as exc:
        raise CliError(f"integration failed: {exc}", EXIT_INTEGRATION) from None
    ok = all(r.passed for r in results)
    doc = {
        "results": [r.as_dict() for r in results],
        "summary": {"passed": sum(r.passed for r in results), "failed": sum(not r.passed for r in results)},
    }
    return doc, EXIT_OK if ok else EXIT_FAILURE


# -- rendering -------------------------------------------------------------------


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v + 0.0)  # shortest round-trip form, without negative zero
    return str(v)


def render_text(doc, indent: int = 0) -> str:
    """Indented ``key: value`` lines; lists of scalars stay on one line."""
    pad = "  " * indent
    lines = []
    for key, val in doc.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(render_text(val, indent + 1))
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            lines.append(f"{pad}{key}:")
            for item in val:
                lines.append(f"{pad}  - " + ", ".join(f"{k}={_scalar(v)}" for k, v in item.items()))
        elif isinstance(val, list):
            lines.append(f"{pad}{key}:")
            for row in val:
                cells = row if isinstance(row, list) else [row]
                lines.append(f"{pad}  - [" + ", ".join(_scalar(c) for c in cells) + "]")
        else:
            lines.append(f"{pad}{key}: {_scalar(val)}")
    return "\n".join(x for x in lines if x)


def render_verify_text(doc) -> str:
    lines = [f"{'PASS' if r['passed'] else 'FAIL'} {r['system']} {r['property']}: {r['detail']}" for r in doc["results"]]
    s = doc["summary"]
    lines.append(f"{s['passed']} passed, {s['failed']} failed")
    return "\n".join(lines)


def _emit(text: str, out: Optional[str]) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot open {out}: {exc.strerror or exc}", EXIT_USAGE) from None
    else:
        _sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varnoether", description="Prolonged Lagrangians, variational equations and extended Noether charges.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, system_required=True):
        if system_required:
            p.add_argument("system_pos", nargs="?", metavar="SYSTEM", help="system file or bundled corpus name")
        p.add_argument("--system", help="system file or bundled corpus name")
        p.add_argument("--init", help="initial-state JSON (default: sibling .json)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"zero-test seed (default {DEFAULT_SEED})")
        p.add_argument("--tol", type=float, default=None, help="zero-test tolerance, or drift tolerance for simulate")
        p.add_argument("--format", choices=("text", "structured", "csv"), default="text")
        p.add_argument("--out", help="write the document to this file instead of stdout")

    p = sub.add_parser("derive", help="gamma, Euler-Lagrange, variational equations and mass matrix")
    common(p)
    for name, hlp in (("check", "invariance reports"), ("charge", "classical and extended charges"), ("simulate", "integrate and monitor charge drift")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.add_argument("--generator", action="append", default=[], help="generator name (repeatable; default all)")
        p.add_argument("--force", action="store_true", help="emit charges of non-symmetries, tagged unverified")
        if name == "simulate":
            p.add_argument("--t-end", type=float, default=100.0)
            p.add_argument("--dt", type=float, default=1e-3)
    p = sub.add_parser("verify", help="run the property suite on the bundled corpus")
    common(p)
    p.add_argument("--only", help="run a single property")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    system = args.system or args.system_pos
    if args.command != "verify" and not system:
        _sys.stderr.write("varnoether: a system file is required\n")
        return EXIT_USAGE
    args.system = system
    if args.format == "csv" and args.command != "simulate":
        _sys.stderr.write("varnoether: csv output is only available for simulate\n")
        return EXIT_USAGE
    commands = {"derive": cmd_derive, "check": cmd_check, "charge": cmd_charge, "simulate": cmd_simulate, "verify": cmd_verify}
    try:
        result = commands[args.command](args)
        doc, code = result[0], result[1]
        if args.command == "simulate" and args.format == "csv":
            buf = io.StringIO()
            write_csv(result[2], buf)
            _emit(buf.getvalue(), args.out)
            _sys.stderr.write(render_text({"drift": doc["drift"]}) + "\n")
        elif args.format == "structured":
            _emit(json.dumps(doc, indent=2), args.out)
        elif args.command == "verify":
            _emit(render_verify_text(doc), args.out)
        else:
            _emit(render_text(doc), args.out)
        return code
    except CliError as exc:
        _sys.stderr.write(f"varnoether: {exc}\n")
        return exc.code


if __name__ == "__main__":
    raise SystemExit(main())
