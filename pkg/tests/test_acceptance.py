"""The ten acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line; the lines are printed in the
terminal summary (and also immediately, visible with ``-s``).
"""

import time

import pytest

from conftest import ACCEPTANCE_LINES
from varnoether import corpus
from varnoether.dynamics import assemble_ode, integrate, monitor, tangent_oracle_study, tangent_solution_check
from varnoether.prolongation import (
    OnShell,
    mass_matrix,
    prolong,
    variational_equations_direct,
    variational_equations_via_gamma,
)
from varnoether.symbolic import TIME, Const, Kind, Symbol, Verdict, add, differentiate, is_zero, mul
from varnoether.symmetry import CLASSICAL, EXTENDED, Charge, check_conservation, check_invariance, classical_charge, extended_charge
from varnoether.verify import (
    SuiteConfig,
    emitted_charges,
    finite_difference_error,
    gamma_scaled,
    homogeneity_identity_error,
    load_system,
    rk4_error_ratio,
)

DRIFT_TOL = 1e-6
OSCILLATOR_DRIFT_TOL = 1e-8


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def minus(a, b):
    return add(a, mul(Const(-1), b))


@pytest.fixture(scope="module")
def conservation_table(bundled):
    """(system, charge label, kind) -> (symbolic verdict, relative drift), plus wall time."""
    start = time.perf_counter()
    table = {}
    cfg = SuiteConfig()
    for cs in bundled.values():
        charges = emitted_charges(cs, cfg)
        onshell = OnShell(cs.system)
        traj = integrate(assemble_ode(cs.system), cs.init, 100.0, 1e-3)
        drifts = monitor(traj, [Charge(c.label, c.expr, c.kind) for c in charges])
        for c, d in zip(charges, drifts):
            verdict = check_conservation(onshell, c.expr).verdict
            table[(cs.name, c.name, c.kind)] = (verdict, d.relative_drift)
    return table, time.perf_counter() - start


def test_criterion_01_example2_reproduction():
    start = time.perf_counter()
    cs = load_system("example2")
    sysdef = cs.system
    gen = {g.name: g for g in cs.generators}["translate_q1"]
    gamma = prolong(sysdef)

    # gamma = m_ab v^a w^b - dU/dq^a eps^a, with U read off as T - L
    m = mass_matrix(sysdef)
    half = Const(1) / Const(2)
    kinetic = add(*(mul(half, m[a][b], sysdef.v[a], sysdef.v[b]) for a in range(2) for b in range(2)))
    U = minus(kinetic, sysdef.lagrangian)
    assert not any(s.kind == Kind.VELOCITY for s in U.free_symbols)
    want_gamma = add(
        *(mul(m[a][b], sysdef.v[a], sysdef.w[b]) for a in range(2) for b in range(2)),
        *(mul(Const(-1), differentiate(U, sysdef.q[a]), sysdef.eps[a]) for a in range(2)),
    )
    gamma_ok = gamma.gamma == want_gamma

    rep = check_invariance(gamma, gen)
    p1 = differentiate(sysdef.lagrangian, sysdef.v[0])
    classical_ok = classical_charge(sysdef, gen).expr == p1
    extended_ok = extended_charge(gamma, gen, report=rep).expr == add(p1, differentiate(gamma.gamma, sysdef.v[0]))
    elapsed = time.perf_counter() - start
    ok = gamma_ok and classical_ok and extended_ok and rep.verdict is Verdict.SYMBOLIC_ZERO and elapsed < 1.0
    record(1, ok, f"example2 gamma/p_A/pi_A exact, residual {rep.verdict}, {elapsed:.3f} s")
    assert ok


def test_criterion_02_conservation(conservation_table):
    table, elapsed = conservation_table
    worst = {}
    ok = elapsed < 30.0
    for (system, name, kind), (verdict, drift) in table.items():
        tol = OSCILLATOR_DRIFT_TOL if system == "oscillator" else DRIFT_TOL
        ok &= verdict.is_zero and drift < tol
        worst[system] = max(worst.get(system, 0.0), drift)
    summary = ", ".join(f"{s} {d:.1e}" for s, d in worst.items())
    record(2, ok, f"{len(table)} charges conserved; worst drift per system: {summary}; {elapsed:.1f} s")
    assert ok


def test_criterion_03_two_n_charges(bundled, conservation_table):
    table, _ = conservation_table
    ok = True
    pairs = 0
    for cs in bundled.values():
        gamma = prolong(cs.system)
        for g in cs.generators:
            if not check_invariance(gamma, g).is_symmetry:
                continue
            kinds = {k for (s, n, k) in table if s == cs.name and n == g.name}
            if CLASSICAL in kinds:
                pairs += 1
                ok &= EXTENDED in kinds
                for k in (CLASSICAL, EXTENDED):
                    verdict, drift = table[(cs.name, g.name, k)]
                    ok &= verdict.is_zero and drift < DRIFT_TOL
    ok &= pairs >= 5
    record(3, ok, f"{pairs} L-symmetries, each with conserved classical and extended charges")
    assert ok


def test_criterion_04_dual_derivation(bundled):
    ok = True
    verdicts = []
    for cs in bundled.values():
        a = variational_equations_direct(cs.system).residuals
        b = variational_equations_via_gamma(cs.system).residuals
        for x, y in zip(a, b):
            v = is_zero(minus(x, y), trials=100, tol=1e-9).verdict
            verdicts.append(str(v))
            ok &= v.is_zero
    record(4, ok, f"direct == via-gamma on {len(bundled)} systems ({', '.join(sorted(set(verdicts)))})")
    assert ok


@pytest.mark.parametrize("name", ["pendulum", "central"])
def test_criterion_05_tangent_oracle(bundled, name):
    cs = bundled[name]
    study = tangent_oracle_study(cs.system, cs.init, (1e-3, 5e-4, 2.5e-4), 10.0, 1e-3)
    ok = all(0.4 <= r <= 0.6 for r in study.ratios)
    record(5, ok, f"{name}: E ratios {', '.join(f'{r:.4f}' for r in study.ratios)}")
    assert ok


def test_criterion_06_tangent_solution(bundled):
    worst = {}
    for cs in bundled.values():
        if cs.system.time_dependent:
            continue
        worst[cs.name] = tangent_solution_check(cs.system, cs.init, 10.0, 1e-3).max_residual
    ok = all(v < 1e-7 for v in worst.values()) and len(worst) == len(corpus.NAMES)
    record(6, ok, "max residual " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_07_homogeneity(bundled):
    lam = Symbol(Kind.PARAMETER, "lambda_")
    symbolic_ok = all(is_zero(gamma_scaled(cs.system, lam)).verdict is Verdict.SYMBOLIC_ZERO for cs in bundled.values())
    osc = bundled["oscillator"]
    err = homogeneity_identity_error(osc.system, osc.init, 10.0, 1e-3)
    ok = symbolic_ok and err < 1e-8
    record(7, ok, f"scaling SymbolicZero on all systems: {symbolic_ok}; oscillator identity defect {err:.1e}")
    assert ok


def test_criterion_08_finite_differences(bundled):
    errs = {}
    for cs in bundled.values():
        sysdef = cs.system
        syms = [TIME, *sysdef.q, *sysdef.v]
        errs[cs.name] = finite_difference_error(sysdef.lagrangian, syms, seed=1729, trials=100, step=1e-6)
    ok = all(e < 1e-6 for e in errs.values())
    record(8, ok, "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def test_criterion_09_rk4_order(bundled):
    osc = bundled["oscillator"]
    e1, e2, ratio = rk4_error_ratio(osc.system, osc.init, t_end=10.0, h=0.1)
    ok = 14.0 <= ratio <= 18.0
    record(9, ok, f"oscillator error ratio {ratio:.3f} (errors {e1:.2e}, {e2:.2e})")
    assert ok


def test_criterion_10_negative_control(bundled):
    osc = bundled["oscillator"]
    gamma = prolong(osc.system)
    gen = {g.name: g for g in osc.generators}["eps_scaling"]
    rep = check_invariance(gamma, gen)
    equal = is_zero(minus(rep.residual, gamma.gamma)).verdict.is_zero
    ok = rep.verdict is Verdict.NONZERO and equal
    record(10, ok, f"eps_scaling: {rep.verdict}, residual equals gamma: {equal}")
    assert ok
