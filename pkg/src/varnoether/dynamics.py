"""Fixed-step integration of the combined dynamics and conservation monitoring."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np

from .model import InitialState, SystemDef
from .prolongation import OdeSystem, SingularMassMatrix, assemble_ode, variational_equations_direct
from .symbolic import TIME, Const, Expr, compile_exprs, substitute
from .symmetry import Charge

#: Rows kept in memory before the trajectory switches to strided storage.
MAX_ROWS = 10**7
ORACLE_DELTAS = (1e-3, 5e-4, 2.5e-4)


class IntegrationError(RuntimeError):
    """Integration stopped at ``step`` (non-finite state or singular mass matrix)."""

    def __init__(self, message: str, step: int, time: float):
        super().__init__(f"{message} at step {step} (t = {time:.17g})")
        self.step = step
        self.time = time


class ChargeEvaluationError(ValueError):
    def __init__(self, name: str, step: int):
        super().__init__(f"charge {name} is not finite at step {step}")
        self.name = name
        self.step = step


class PreconditionError(ValueError):
    pass


def bind_parameters(e: Expr, sys: SystemDef) -> Expr:
    """Substitute the system's parameter values (exactly, as binary fractions)."""
    mapping = {p: Const(Fraction(sys.params[p.name])) for p in sys.param_symbols}
    return substitute(e, mapping)


@dataclass
class Trajectory:
    """Uniform-grid solution; ``states`` holds every ``stride``-th step."""

    system: SystemDef
    labels: List[str]
    t0: float
    h: float
    steps: int
    stride: int
    times: np.ndarray
    states: np.ndarray
    charges: Dict[str, np.ndarray] = field(default_factory=dict)
    # full-resolution drift maxima, filled when charges are streamed
    streamed: Dict[str, tuple] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.times)

    def column(self, label: str) -> np.ndarray:
        return self.states[:, self.labels.index(label)]


@dataclass(frozen=True)
class DriftReport:
    name: str
    initial: float
    max_drift: float
    relative_drift: float

    def passes(self, tol: float) -> bool:
        return self.relative_drift < tol


def _step_count(t0: float, t_end: float, h: float) -> int:
    if not h > 0:
        raise ValueError("step size must be positive")
    span = t_end - t0
    if not span > 0:
        raise ValueError("t_end must exceed t0")
    steps = round(span / h)
    if steps < 1 or abs(steps * h - span) > 1e-9 * span:
        raise ValueError(f"step {h} does not divide the interval [{t0}, {t_end}]")
    return steps


def _charge_function(sys: SystemDef, labels_syms, expr: Expr, vectorized: bool):
    return compile_exprs([bind_parameters(expr, sys)], [TIME] + labels_syms, vectorized=vectorized)


def run(
    ode: OdeSystem,
    t0: float,
    y0: Sequence[float],
    t_end: float,
    h: float,
    charges: Sequence[Charge] = (),
    max_rows: int = MAX_ROWS,
) -> Trajectory:
    """Classic fourth-order Runge-Kutta from ``y0`` on a uniform grid.

    When the grid has more than ``max_rows`` points only every ``stride``-th
    state is stored; ``charges`` are then evaluated at every step while
    integrating so their drift maxima stay exact.
    """
    steps = _step_count(t0, t_end, h)
    stride = max(1, math.ceil((steps + 1) / max_rows))
    rows = steps // stride + 1
    dim = ode.dimension
    if len(y0) != dim:
        raise ValueError(f"initial state has {len(y0)} entries, system needs {dim}")
    sys = ode.system
    syms = sys.state_symbols if ode.tangent else sys.q + sys.v
    stream = []
    if stride > 1:
        for c in charges:
            fn = _charge_function(sys, syms, c.expr, vectorized=False)
            stream.append([c.name, fn, None, 0.0])

    f = ode.rhs
    states = np.empty((rows, dim))
    times = t0 + h * stride * np.arange(rows)
    y = tuple(float(x) for x in y0)
    states[0] = y
    half = 0.5 * h
    sixth = h / 6.0
    rng = range(dim)
    for k in range(steps + 1):
        t = t0 + k * h
        for entry in stream:
            try:
                (val,) = entry[1](t, *y)
            except (ValueError, ArithmeticError):
                raise ChargeEvaluationError(entry[0], k) from None
            if entry[2] is None:
                entry[2] = val
            entry[3] = max(entry[3], abs(val - entry[2]))
        if k == steps:
            break
        try:
            k1 = f(t, y)
            k2 = f(t + half, [y[i] + half * k1[i] for i in rng])
            k3 = f(t + half, [y[i] + half * k2[i] for i in rng])
            k4 = f(t + h, [y[i] + h * k3[i] for i in rng])
        except SingularMassMatrix as exc:
            raise IntegrationError(str(exc), k, t) from exc
        except (ValueError, ArithmeticError) as exc:
            raise IntegrationError(f"right-hand side failed ({exc})", k, t) from exc
        y = tuple(y[i] + sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) for i in rng)
        if not math.isfinite(sum(y)):
            raise IntegrationError("non-finite state", k + 1, t + h)
        if (k + 1) % stride == 0:
            states[(k + 1) // stride] = y
    traj = Trajectory(sys, ode.labels, t0, h, steps, stride, times, states)
    for name, _, first, drift in stream:
        traj.streamed[name] = (first, drift)
    return traj


def integrate(
    ode: OdeSystem,
    init: InitialState,
    t_end: float,
    h: float,
    charges: Sequence[Charge] = (),
    max_rows: int = MAX_ROWS,
) -> Trajectory:
    """Integrate the system from an initial state file's values."""
    y0 = init.vector(ode.system)
    if not ode.tangent:
        y0 = y0[: 2 * ode.system.n]
    return run(ode, init.t0, y0, t_end, h, charges, max_rows)


def evaluate_charge(traj: Trajectory, charge: Charge) -> np.ndarray:
    """Charge values at every stored row."""
    sys = traj.system
    syms = sys.state_symbols if len(traj.labels) == 4 * sys.n else sys.q + sys.v
    fn = _charge_function(sys, syms, charge.expr, vectorized=True)
    with np.errstate(all="ignore"):
        (vals,) = fn(traj.times, *traj.states.T)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), traj.times.shape).copy()
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise ChargeEvaluationError(charge.name, int(bad[0]) * traj.stride)
    return vals


def monitor(traj: Trajectory, charges: Sequence[Charge]) -> List[DriftReport]:
    """Drift ``max_t |c(t) - c(t0)|`` of each charge along the trajectory."""
    out = []
    for c in charges:
        vals = evaluate_charge(traj, c)
        traj.charges[c.name] = vals
        first = float(vals[0])
        drift = float(np.max(np.abs(vals - first)))
        if c.name in traj.streamed:
            drift = max(drift, traj.streamed[c.name][1])
        out.append(DriftReport(c.name, first, drift, drift / max(1.0, abs(first))))
    return out


def write_csv(traj: Trajectory, stream: TextIO, charge_names: Optional[Sequence[str]] = None) -> None:
    """Header ``t,<state labels>,<charges>``; numbers with 17 significant digits."""
    names = list(traj.charges) if charge_names is None else list(charge_names)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t"] + traj.labels + names)
    cols = [traj.times] + [traj.states[:, i] for i in range(traj.states.shape[1])] + [traj.charges[n] for n in names]
    for row in zip(*cols):
        writer.writerow([format(float(x), ".17g") for x in row])


def trajectory_csv(traj: Trajectory, charge_names: Optional[Sequence[str]] = None) -> str:
    buf = io.StringIO()
    write_csv(traj, buf, charge_names)
    return buf.getvalue()


# -- finite-difference oracle for the variational equations ------------------


@dataclass(frozen=True)
class OracleReport:
    delta: float
    error: float


@dataclass(frozen=True)
class OracleStudy:
    reports: List[OracleReport]

    @property
    def ratios(self) -> List[float]:
        e = [r.error for r in self.reports]
        return [b / a if a > 0 else math.nan for a, b in zip(e, e[1:])]


def _oracle_error(base_q: np.ndarray, pert_q: np.ndarray, eps: np.ndarray, delta: float) -> float:
    return float(np.max(np.abs((pert_q - base_q) / delta - eps)))


def tangent_oracle_study(
    sys: SystemDef,
    init: InitialState,
    deltas: Sequence[float] = ORACLE_DELTAS,
    t_end: float = 10.0,
    h: float = 1e-3,
) -> OracleStudy:
    """Compare integrated deviations with finite differences of base trajectories.

    For each ``delta`` the base motion is restarted from
    ``(q0 + delta*eps0, v0 + delta*w0)``; the discrepancy
    ``max_t |(q_delta - q)/delta - eps|`` must shrink linearly in ``delta``.
    """
    n = sys.n
    combined = integrate(assemble_ode(sys), init, t_end, h)
    base_ode = assemble_ode(sys, tangent=False)
    y = init.vector(sys)
    q0, v0, e0, w0 = y[:n], y[n : 2 * n], y[2 * n : 3 * n], y[3 * n :]
    base = run(base_ode, init.t0, q0 + v0, t_end, h)
    eps = combined.states[:, 2 * n : 3 * n]
    reports = []
    for d in deltas:
        if not d > 0:
            raise ValueError("delta must be positive")
        start = [a + d * b for a, b in zip(q0, e0)] + [a + d * b for a, b in zip(v0, w0)]
        pert = run(base_ode, init.t0, start, t_end, h)
        reports.append(OracleReport(d, _oracle_error(base.states[:, :n], pert.states[:, :n], eps, d)))
    return OracleStudy(reports)


def tangent_oracle(sys: SystemDef, init: InitialState, delta: float, t_end: float = 10.0, h: float = 1e-3) -> OracleReport:
    return tangent_oracle_study(sys, init, (delta,), t_end, h).reports[0]


# -- time derivative of a solution solves the variational equations --------------


@dataclass(frozen=True)
class TangentSolutionReport:
    max_residual: float
    points: int


def tangent_solution_check(sys: SystemDef, init: InitialState, t_end: float = 10.0, h: float = 1e-3) -> TangentSolutionReport:
    """Evaluate the variational residuals at ``eps = d(q)``, ``d(eps) = d(d(q))``.

    The third derivative entering the residual comes from a five-point
    central difference of the accelerations along the computed grid, so
    only interior points are checked.
    """
    if sys.time_dependent:
        raise PreconditionError(f"system {sys.name} depends explicitly on t")
    n = sys.n
    base_ode = assemble_ode(sys, tangent=False)
    y = init.vector(sys)
    traj = run(base_ode, init.t0, y[: 2 * n], t_end, h)
    if traj.count < 5:
        raise ValueError("need at least four steps for the five-point stencil")
    q = traj.states[:, :n]
    v = traj.states[:, n:]
    acc = np.array([base_ode.rhs(t, row)[n:] for t, row in zip(traj.times, traj.states)])
    jerk = (acc[:-4] - 8.0 * acc[1:-3] + 8.0 * acc[3:-1] - acc[4:]) / (12.0 * h)
    inner = slice(2, -2)

    raw = variational_equations_direct(sys, eliminate=False)
    args = [TIME] + sys.q + sys.v + sys.eps + sys.w + sys.acc + sys.dev_acc
    fn = compile_exprs([bind_parameters(r, sys) for r in raw.residuals], args, vectorized=True)
    cols = [traj.times[inner]]
    cols += [q[inner, a] for a in range(n)] + [v[inner, a] for a in range(n)]
    cols += [v[inner, a] for a in range(n)] + [acc[inner, a] for a in range(n)]
    cols += [acc[inner, a] for a in range(n)] + [jerk[:, a] for a in range(n)]
    res = fn(*cols)
    worst = max(float(np.max(np.abs(np.broadcast_to(r, cols[0].shape)))) for r in res)
    return TangentSolutionReport(worst, len(cols[0]))
