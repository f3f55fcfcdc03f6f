"""Symmetry checks and Noether charges for L and for its prolongation gamma."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import Generator, SystemDef
from .prolongation import OnShell, ProlongedDensity
from .symbolic import (
    TIME,
    ZERO,
    Const,
    Expr,
    Kind,
    Verdict,
    ZeroTest,
    add,
    differentiate,
    is_zero,
    mul,
    total_time_derivative,
)
from .symbolic.numeric import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS

CLASSICAL = "classical"
EXTENDED = "extended"


class NotASymmetry(ValueError):
    def __init__(self, generator: str, report: "InvarianceReport"):
        super().__init__(f"generator {generator} is not a symmetry (residual {report.residual})")
        self.report = report


class GeneratorMismatch(ValueError):
    """Generator built for a different system, or violating an operation's precondition."""


@dataclass(frozen=True)
class InvarianceReport:
    generator: str
    residual: Expr
    verdict: Verdict
    witness: Optional[dict] = None
    max_abs: float = 0.0

    @property
    def is_symmetry(self) -> bool:
        return self.verdict.is_zero


@dataclass(frozen=True)
class Charge:
    name: str
    expr: Expr
    kind: str
    verified: bool = True

    @property
    def label(self) -> str:
        """Unique within one generator: ``<generator>.<kind>``."""
        return f"{self.name}.{self.kind}"


def _check_compatible(sys: SystemDef, g: Generator) -> None:
    if len(g.zeta) != sys.n or len(g.eta) != sys.n:
        raise GeneratorMismatch(f"generator {g.name} has {len(g.zeta)} components, system {sys.name} has {sys.n}")
    known = set(sys.state_symbols) | set(sys.param_symbols) | {TIME}
    for e in g.expressions():
        stray = [s for s in e.free_symbols if s not in known]
        if stray:
            raise GeneratorMismatch(f"generator {g.name} uses {stray[0]}, unknown to system {sys.name}")


def invariance_residual(density: Expr, pairs, xi: Expr, gauge: Expr) -> Expr:
    """Infinitesimal (quasi-)invariance residual of a density.

    ``pairs`` holds ``(coordinate, its velocity, generator component)``
    triples.  The residual is ``pr X(density) + density * D xi - D gauge``,
    which vanishes identically exactly when the generator is a symmetry.
    """
    dxi = total_time_derivative(xi)
    terms = [mul(xi, differentiate(density, TIME)), mul(density, dxi)]
    for c, speed, comp in pairs:
        terms.append(mul(comp, differentiate(density, c)))
        lifted = add(total_time_derivative(comp), mul(Const(-1), speed, dxi))
        terms.append(mul(lifted, differentiate(density, speed)))
    terms.append(mul(Const(-1), total_time_derivative(gauge)))
    return add(*terms)


def noether_current(density: Expr, pairs, xi: Expr, gauge: Expr) -> Expr:
    terms = [mul(density, xi)]
    for c, speed, comp in pairs:
        terms.append(mul(differentiate(density, speed), add(comp, mul(Const(-1), speed, xi))))
    terms.append(mul(Const(-1), gauge))
    return add(*terms)


def _gamma_pairs(sys: SystemDef, g: Generator):
    return list(zip(sys.q, sys.v, g.zeta)) + list(zip(sys.eps, sys.w, g.eta))


def _report(name: str, residual: Expr, trials: int, tol: float, seed: int) -> InvarianceReport:
    test = is_zero(residual, trials=trials, tol=tol, seed=seed)
    return InvarianceReport(name, residual, test.verdict, test.witness, test.max_abs)


def check_invariance(
    gamma: ProlongedDensity,
    g: Generator,
    trials: int = DEFAULT_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
) -> InvarianceReport:
    """Decide whether ``g`` leaves the prolonged action (quasi-)invariant."""
    sys = gamma.system
    _check_compatible(sys, g)
    residual = invariance_residual(gamma.gamma, _gamma_pairs(sys, g), g.xi, g.gauge_or_zero)
    return _report(g.name, residual, trials, tol, seed)


def extended_charge(
    gamma: ProlongedDensity,
    g: Generator,
    force: bool = False,
    report: Optional[InvarianceReport] = None,
    **zero_opts,
) -> Charge:
    """The conserved quantity of gamma attached to ``g``.

    Raises :class:`NotASymmetry` unless the invariance check passes; with
    ``force`` the charge is returned anyway, marked unverified.
    """
    sys = gamma.system
    if report is None:
        report = check_invariance(gamma, g, **zero_opts)
    if not report.is_symmetry and not force:
        raise NotASymmetry(g.name, report)
    tau = noether_current(gamma.gamma, _gamma_pairs(sys, g), g.xi, g.gauge_or_zero)
    return Charge(g.name, tau, EXTENDED, report.is_symmetry)


def _deviation_free(e: Expr) -> bool:
    return not any(s.kind in (Kind.DEVIATION, Kind.DEVIATION_VELOCITY) for s in e.free_symbols)


def check_classical_invariance(sys: SystemDef, g: Generator, **zero_opts) -> InvarianceReport:
    """Invariance of ``L`` itself under the ``(xi, zeta)`` part of ``g``."""
    _check_compatible(sys, g)
    if not all(_deviation_free(e) for e in (g.xi, *g.zeta)):
        raise GeneratorMismatch(f"generator {g.name}: xi and zeta must not depend on deviations")
    pairs = list(zip(sys.q, sys.v, g.zeta))
    residual = invariance_residual(sys.lagrangian, pairs, g.xi, g.classical_gauge_or_zero)
    return _report(g.name, residual, **_opts(zero_opts))


def _opts(zero_opts: dict) -> dict:
    return {
        "trials": zero_opts.get("trials", DEFAULT_TRIALS),
        "tol": zero_opts.get("tol", DEFAULT_TOL),
        "seed": zero_opts.get("seed", DEFAULT_SEED),
    }


def classical_applicable(sys: SystemDef, g: Generator) -> bool:
    """True when ``g`` has a non-trivial, deviation-free ``(xi, zeta)`` part."""
    if not all(_deviation_free(e) for e in (g.xi, *g.zeta)):
        return False
    return g.xi != ZERO or any(z != ZERO for z in g.zeta)


def classical_charge(
    sys: SystemDef,
    g: Generator,
    force: bool = False,
    report: Optional[InvarianceReport] = None,
    **zero_opts,
) -> Charge:
    """Ordinary Noether charge of ``L`` for the ``(xi, zeta)`` part of ``g``."""
    if report is None:
        report = check_classical_invariance(sys, g, **zero_opts)
    if not report.is_symmetry and not force:
        raise NotASymmetry(g.name, report)
    pairs = list(zip(sys.q, sys.v, g.zeta))
    c = noether_current(sys.lagrangian, pairs, g.xi, g.classical_gauge_or_zero)
    return Charge(g.name, c, CLASSICAL, report.is_symmetry)


def gamma_gradient_charge(gamma: ProlongedDensity, g: Generator) -> Charge:
    """The ``sum_a dgamma/dv^a * zeta^a`` part of a translation charge.

    Only defined for pure translations: ``xi = 0`` and constant ``zeta``, ``eta``.
    """
    sys = gamma.system
    _check_compatible(sys, g)
    if g.xi != ZERO or not all(isinstance(c, Const) for c in (*g.zeta, *g.eta)):
        raise GeneratorMismatch(f"generator {g.name} is not a translation (need xi = 0, constant zeta and eta)")
    expr = add(*(mul(differentiate(gamma.gamma, v), z) for v, z in zip(sys.v, g.zeta)))
    return Charge(f"{g.name}_gradient", expr, EXTENDED)


def conservation_residual(onshell: OnShell, expr: Expr) -> Expr:
    """Total time derivative of ``expr`` with accelerations put on shell."""
    return onshell.eliminate(total_time_derivative(expr))


def check_conservation(
    onshell: OnShell,
    expr: Expr,
    trials: int = DEFAULT_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
) -> ZeroTest:
    """Zero test of ``d/dt expr`` along solutions of the combined equations."""
    residual = conservation_residual(onshell, expr)
    complete = None if onshell.symbolic is not None else onshell.complete
    return is_zero(residual, trials=trials, tol=tol, seed=seed, complete=complete, variables=onshell.variables)


def homogeneity_defect(gamma: ProlongedDensity) -> Expr:
    """``sum_a dgamma/dw^a eps^a``; its time derivative equals gamma on shell."""
    sys = gamma.system
    return add(*(mul(differentiate(gamma.gamma, w), e) for w, e in zip(sys.w, sys.eps)))
