"""Property suite run by ``varnoether verify`` over the bundled corpus."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from . import corpus
from .dynamics import (
    ORACLE_DELTAS,
    assemble_ode,
    bind_parameters,
    integrate,
    monitor,
    run,
    tangent_oracle_study,
    tangent_solution_check,
)
from .model import Generator, InitialState, SystemDef, parse_initial_state, parse_system
from .prolongation import (
    OnShell,
    euler_lagrange,
    euler_lagrange_of_gamma_in_eps,
    mass_matrix,
    prolong,
    variational_equations_direct,
    variational_equations_via_gamma,
)
from .symbolic import (
    MINUS_ONE,
    TIME,
    ZERO,
    Kind,
    Symbol,
    Verdict,
    add,
    compile_exprs,
    differentiate,
    evaluate,
    is_zero,
    mul,
    substitute,
    total_time_derivative,
)
from .symbolic.numeric import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, DomainError
from .symmetry import (
    Charge,
    check_classical_invariance,
    check_conservation,
    check_invariance,
    classical_applicable,
    classical_charge,
    extended_charge,
    homogeneity_defect,
)

DRIFT_TOL = 1e-6
ORACLE_RATIO = (0.4, 0.6)
TANGENT_TOL = 1e-7
HOMOGENEITY_TOL = 1e-8
FD_STEP = 1e-6
FD_TOL = 1e-6
RK4_RATIO = (14.0, 18.0)
NEGATIVE_DRIFT = 1e-2


@dataclass
class CorpusSystem:
    name: str
    system: SystemDef
    generators: List[Generator]
    init: Optional[InitialState]


@dataclass(frozen=True)
class PropertyResult:
    system: str
    prop: str
    passed: bool
    detail: str

    def as_dict(self) -> dict:
        return {"system": self.system, "property": self.prop, "passed": self.passed, "detail": self.detail}


@dataclass
class SuiteConfig:
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    tol: float = DEFAULT_TOL
    t_end: float = 100.0
    h: float = 1e-3
    drift_tol: float = DRIFT_TOL
    oracle_t_end: float = 10.0

    @property
    def zero_opts(self) -> dict:
        return {"trials": self.trials, "tol": self.tol, "seed": self.seed}


def load_system(name_or_path: str) -> CorpusSystem:
    """A bundled system by name, or a ``.ndl`` file with an optional sibling ``.json``."""
    if name_or_path in corpus.NAMES:
        text = corpus.read(name_or_path)
        init_text = corpus.read(name_or_path, ".json")
    else:
        p = Path(name_or_path)
        text = p.read_text(encoding="utf-8")
        sibling = p.with_suffix(".json")
        init_text = sibling.read_text(encoding="utf-8") if sibling.exists() else None
    sys, gens = parse_system(text)
    init = parse_initial_state(init_text, sys) if init_text is not None else None
    return CorpusSystem(sys.name, sys, gens, init)


def load_corpus(names: Optional[Sequence[str]] = None) -> List[CorpusSystem]:
    return [load_system(n) for n in (names or corpus.NAMES)]


def is_linear(sys: SystemDef) -> bool:
    """True when the equations of motion are linear in (q, v)."""
    el = euler_lagrange(sys)
    state = sys.q + sys.v
    for r in el.residuals:
        for a in state:
            da = differentiate(r, a)
            if any(differentiate(da, b) != ZERO for b in state):
                return False
    return True


def emitted_charges(cs: CorpusSystem, cfg: SuiteConfig) -> List[Charge]:
    """Extended charges of the zero-verdict generators, plus the classical ones of L-symmetries."""
    gamma = prolong(cs.system)
    out = []
    for g in cs.generators:
        rep = check_invariance(gamma, g, **cfg.zero_opts)
        if not rep.is_symmetry:
            continue
        if classical_applicable(cs.system, g):
            crep = check_classical_invariance(cs.system, g, **cfg.zero_opts)
            if crep.is_symmetry:
                out.append(classical_charge(cs.system, g, report=crep))
        out.append(extended_charge(gamma, g, report=rep))
    return out


# -- individual properties ----------------------------------------------------


def prop_dual_derivation(cs, cfg):
    direct = variational_equations_direct(cs.system)
    via = variational_equations_via_gamma(cs.system)
    out = []
    for c, a, b in zip(cs.system.coords, direct.residuals, via.residuals):
        t = is_zero(add(a, mul(MINUS_ONE, b)), **cfg.zero_opts)
        out.append(PropertyResult(cs.name, "dual_derivation", t.verdict.is_zero, f"{c}: {t.verdict}"))
    return out


def prop_el_recovery(cs, cfg):
    el = euler_lagrange(cs.system).residuals
    rec = euler_lagrange_of_gamma_in_eps(cs.system)
    ok = all(a == b for a, b in zip(el, rec))
    return [PropertyResult(cs.name, "el_recovery", ok, "exact" if ok else "mismatch")]


def gamma_scaled(sys: SystemDef, lam: Symbol):
    gamma = prolong(sys).gamma
    mapping = {e: mul(lam, e) for e in sys.eps}
    mapping.update({w: mul(lam, w) for w in sys.w})
    return add(substitute(gamma, mapping), mul(MINUS_ONE, lam, gamma))


def prop_homogeneity(cs, cfg):
    lam = Symbol(Kind.PARAMETER, "lambda_")
    t = is_zero(gamma_scaled(cs.system, lam), **cfg.zero_opts)
    return [PropertyResult(cs.name, "homogeneity", t.verdict is Verdict.SYMBOLIC_ZERO, str(t.verdict))]


def prop_linearity(cs, cfg):
    sys = cs.system
    lin = sys.eps + sys.w + sys.dev_acc
    ok = True
    for ode in (variational_equations_direct(sys), variational_equations_via_gamma(sys)):
        for r in ode.residuals:
            for a in lin:
                da = differentiate(r, a)
                ok &= all(differentiate(da, b) == ZERO for b in lin)
    return [PropertyResult(cs.name, "linearity", ok, "second derivatives vanish" if ok else "nonlinear term")]


def prop_mass_symmetry(cs, cfg):
    m = mass_matrix(cs.system)
    n = cs.system.n
    ok = all(is_zero(add(m[a][b], mul(MINUS_ONE, m[b][a])), **cfg.zero_opts).verdict.is_zero for a in range(n) for b in range(n))
    return [PropertyResult(cs.name, "mass_symmetry", ok, "symmetric" if ok else "asymmetric")]


def finite_difference_error(e, symbols, seed: int, trials: int = 100, step: float = FD_STEP) -> float:
    """Worst ``|d_sym - d_fd| / max(1, |d_sym|)`` over seeded bindings in [-1, 1]."""
    rng = random.Random(seed)
    free = sorted(e.free_symbols | set(symbols))
    derivs = {s: differentiate(e, s) for s in symbols}
    worst = 0.0
    done = 0
    attempts = 0
    while done < trials:
        attempts += 1
        if attempts > 11 * trials:
            raise DomainError("too many inadmissible bindings for the finite-difference check")
        b = {s: rng.uniform(-1.0, 1.0) for s in free}
        try:
            errs = []
            for s, d in derivs.items():
                sym = evaluate(d, b)
                up = dict(b)
                up[s] += step
                dn = dict(b)
                dn[s] -= step
                fd = (evaluate(e, up) - evaluate(e, dn)) / (2 * step)
                errs.append(abs(sym - fd) / max(1.0, abs(sym)))
        except (DomainError, ArithmeticError):
            continue
        worst = max([worst] + errs)
        done += 1
    return worst


def prop_differentiation(cs, cfg):
    sys = cs.system
    syms = [TIME] + sys.q + sys.v
    err = finite_difference_error(sys.lagrangian, syms, cfg.seed)
    return [PropertyResult(cs.name, "differentiation", err < FD_TOL, f"max relative error {err:.3e}")]


def prop_conservation(cs, cfg):
    onshell = OnShell(cs.system)
    out = []
    for c in emitted_charges(cs, cfg):
        t = check_conservation(onshell, c.expr, **cfg.zero_opts)
        out.append(PropertyResult(cs.name, "conservation", t.verdict.is_zero, f"{c.label}: {t.verdict}"))
    return out


def prop_drift(cs, cfg):
    charges = emitted_charges(cs, cfg)
    if cs.init is None or not charges:
        return []
    traj = integrate(assemble_ode(cs.system), cs.init, cfg.t_end, cfg.h)
    relabeled = [Charge(c.label, c.expr, c.kind) for c in charges]
    return [
        PropertyResult(cs.name, "drift", d.passes(cfg.drift_tol), f"{d.name}: relative drift {d.relative_drift:.3e}")
        for d in monitor(traj, relabeled)
    ]


def prop_oracle(cs, cfg):
    if cs.init is None:
        return []
    study = tangent_oracle_study(cs.system, cs.init, ORACLE_DELTAS, cfg.oracle_t_end, cfg.h)
    out = [
        PropertyResult(cs.name, "oracle", True, f"delta={r.delta:g}: E={r.error:.6e}") for r in study.reports
    ]
    if is_linear(cs.system):
        worst = max(r.error for r in study.reports)
        out.append(PropertyResult(cs.name, "oracle", worst < 1e-6, f"linear dynamics: max E {worst:.3e}"))
        return out
    lo, hi = ORACLE_RATIO
    for r0, r1, ratio in zip(study.reports, study.reports[1:], study.ratios):
        ok = lo <= ratio <= hi
        out.append(PropertyResult(cs.name, "oracle", ok, f"E({r1.delta:g})/E({r0.delta:g}) = {ratio:.4f}"))
    return out


def prop_tangent_solution(cs, cfg):
    if cs.init is None or cs.system.time_dependent:
        return []
    rep = tangent_solution_check(cs.system, cs.init, cfg.oracle_t_end, cfg.h)
    return [PropertyResult(cs.name, "tangent_solution", rep.max_residual < TANGENT_TOL, f"max residual {rep.max_residual:.3e}")]


def homogeneity_identity_error(sys: SystemDef, init: InitialState, t_end: float, h: float) -> float:
    """Pointwise ``|d/dt(sum dgamma/dw * eps) - gamma|`` along a computed solution.

    Accelerations come from the right-hand side at each grid point, so the
    derivative is taken on shell without any symbolic solve.
    """
    gamma = prolong(sys)
    expr = add(total_time_derivative(homogeneity_defect(gamma)), mul(MINUS_ONE, gamma.gamma))
    ode = assemble_ode(sys)
    traj = integrate(ode, init, t_end, h)
    n = sys.n
    accs = np.array([ode.rhs(t, row) for t, row in zip(traj.times, traj.states)])
    args = [TIME] + sys.state_symbols + sys.acc + sys.dev_acc
    fn = compile_exprs([bind_parameters(expr, sys)], args, vectorized=True)
    cols = [traj.times] + list(traj.states.T) + [accs[:, n + a] for a in range(n)] + [accs[:, 3 * n + a] for a in range(n)]
    (vals,) = fn(*cols)
    return float(np.max(np.abs(np.broadcast_to(vals, traj.times.shape))))


def prop_homogeneity_identity(cs, cfg):
    if cs.init is None:
        return []
    err = homogeneity_identity_error(cs.system, cs.init, cfg.oracle_t_end, cfg.h)
    return [PropertyResult(cs.name, "homogeneity_identity", err < HOMOGENEITY_TOL, f"max |defect| {err:.3e}")]


def rk4_error_ratio(sys: SystemDef, init: InitialState, t_end: float = 10.0, h: float = 0.1) -> tuple:
    """Final-state errors at ``h`` and ``h/2`` against the matrix-exponential solution.

    Only meaningful for linear, autonomous systems.
    """
    ode = assemble_ode(sys)
    dim = ode.dimension
    jac = np.array([ode.rhs(0.0, list(e)) for e in np.eye(dim)]).T
    y0 = np.array(init.vector(sys))
    exact = scipy.linalg.expm(jac * (t_end - init.t0)) @ y0
    errs = [float(np.max(np.abs(run(ode, init.t0, y0, t_end, step).states[-1] - exact))) for step in (h, h / 2)]
    return errs[0], errs[1], errs[0] / errs[1]


def prop_rk4_order(cs, cfg):
    if cs.init is None or not is_linear(cs.system) or cs.system.time_dependent:
        return []
    e1, e2, ratio = rk4_error_ratio(cs.system, cs.init)
    if e2 < 1e-13:  # exact polynomial dynamics: nothing to measure
        return [PropertyResult(cs.name, "rk4_order", True, f"exact to round-off ({e1:.2e}, {e2:.2e})")]
    lo, hi = RK4_RATIO
    return [PropertyResult(cs.name, "rk4_order", lo <= ratio <= hi, f"error ratio {ratio:.3f}")]


def prop_negative_control(cs, cfg):
    """A product of a coordinate and a deviation is never conserved in these systems."""
    if cs.init is None:
        return []
    sys = cs.system
    gamma = prolong(sys)
    out = []
    for g in cs.generators:
        rep = check_invariance(gamma, g, **cfg.zero_opts)
        if not rep.is_symmetry:
            out.append(PropertyResult(cs.name, "negative_control", True, f"{g.name}: rejected ({rep.verdict})"))
    probe = Charge("probe", mul(sys.q[0], sys.eps[0]), "extended", False)
    traj = integrate(assemble_ode(sys), cs.init, cfg.t_end, cfg.h)
    (d,) = monitor(traj, [probe])
    out.append(
        PropertyResult(cs.name, "negative_control", d.relative_drift > NEGATIVE_DRIFT, f"{sys.coords[0]}*eps({sys.coords[0]}): relative drift {d.relative_drift:.3e}")
    )
    return out


PROPERTIES: Dict[str, Callable] = {
    "dual_derivation": prop_dual_derivation,
    "el_recovery": prop_el_recovery,
    "homogeneity": prop_homogeneity,
    "linearity": prop_linearity,
    "mass_symmetry": prop_mass_symmetry,
    "differentiation": prop_differentiation,
    "conservation": prop_conservation,
    "drift": prop_drift,
    "oracle": prop_oracle,
    "tangent_solution": prop_tangent_solution,
    "homogeneity_identity": prop_homogeneity_identity,
    "rk4_order": prop_rk4_order,
    "negative_control": prop_negative_control,
}

# the negative control needs a system whose q*eps is visibly not conserved
_NEGATIVE_CONTROL_SYSTEMS = {"oscillator"}


def run_suite(
    systems: Sequence[CorpusSystem],
    only: Optional[Sequence[str]] = None,
    cfg: Optional[SuiteConfig] = None,
) -> List[PropertyResult]:
    cfg = cfg or SuiteConfig()
    names = list(only) if only else list(PROPERTIES)
    unknown = [n for n in names if n not in PROPERTIES]
    if unknown:
        raise KeyError(unknown[0])
    out = []
    for cs in systems:
        for name in names:
            if name == "negative_control" and cs.name not in _NEGATIVE_CONTROL_SYSTEMS:
                continue
            out.extend(PROPERTIES[name](cs, cfg))
    return out
