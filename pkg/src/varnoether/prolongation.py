"""The prolonged Lagrangian and the equations it generates.

For a Lagrangian ``L(t, q, v)`` the prolonged density is

    gamma = sum_a dL/dq^a * eps^a + dL/dv^a * w^a

whose Euler-Lagrange equations with respect to ``eps`` are those of ``L``
and with respect to ``q`` are the variational (Jacobi) equations.  This
module builds both sets symbolically, in implicit form affine in the
acceleration placeholders ``d(d(q))`` / ``d(d(eps(q)))``, and assembles
the explicit first-order right-hand side used by the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .model import SystemDef
from .symbolic import (
    ZERO,
    Const,
    Expr,
    Symbol,
    add,
    differentiate,
    mul,
    power,
    substitute,
    total_time_derivative,
)
from .symbolic.numeric import _rpow
from .symbolic.render import python_source

#: Systems up to this many coordinates get closed-form symbolic accelerations.
SYMBOLIC_SOLVE_LIMIT = 3
#: Condition-number bound above which the mass matrix counts as singular.
CONDITION_LIMIT = 1e12


class SingularMassMatrix(ArithmeticError):
    """The velocity Hessian of the Lagrangian cannot be inverted."""

    def __init__(self, message: str, condition: float = math.inf):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class ProlongedDensity:
    system: SystemDef
    gamma: Expr


@dataclass(frozen=True)
class ImplicitOde:
    """Residuals ``r_a``, affine in ``placeholders`` with coefficient matrix ``mass``."""

    system: SystemDef
    residuals: Tuple[Expr, ...]
    mass: Tuple[Tuple[Expr, ...], ...]
    placeholders: Tuple[Symbol, ...]


def prolong(sys: SystemDef) -> ProlongedDensity:
    L = sys.lagrangian
    terms = []
    for q, v, e, w in zip(sys.q, sys.v, sys.eps, sys.w):
        terms.append(mul(differentiate(L, q), e))
        terms.append(mul(differentiate(L, v), w))
    return ProlongedDensity(sys, add(*terms))


def mass_matrix(sys: SystemDef) -> Tuple[Tuple[Expr, ...], ...]:
    L = sys.lagrangian
    first = [differentiate(L, v) for v in sys.v]
    return tuple(tuple(differentiate(first[a], vb) for vb in sys.v) for a in range(sys.n))


def _lagrange_operator(lagrangian: Expr, coords: Sequence[Symbol], speeds: Sequence[Symbol]) -> List[Expr]:
    """``D(dF/d speed) - dF/d coord`` for each pair."""
    return [
        add(total_time_derivative(differentiate(lagrangian, s)), mul(Const(-1), differentiate(lagrangian, c)))
        for c, s in zip(coords, speeds)
    ]


def euler_lagrange(sys: SystemDef) -> ImplicitOde:
    """Euler-Lagrange residuals of ``L``; affine in the accelerations ``d(d(q))``."""
    res = _lagrange_operator(sys.lagrangian, sys.q, sys.v)
    return ImplicitOde(sys, tuple(res), mass_matrix(sys), tuple(sys.acc))


# -- closed-form linear algebra over expressions --------------------------------


def determinant(m: Sequence[Sequence[Expr]]) -> Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return add(mul(m[0][0], m[1][1]), mul(Const(-1), m[0][1], m[1][0]))
    terms = []
    for j in range(n):
        if m[0][j] == ZERO:
            continue
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        sign = Const(-1 if j % 2 else 1)
        terms.append(mul(sign, m[0][j], determinant(minor)))
    return add(*terms)


def solve_symbolic(m: Sequence[Sequence[Expr]], rhs: Sequence[Expr]) -> List[Expr]:
    """Solve ``m x = rhs`` by Cramer's rule.

    Raises
    ------
    SingularMassMatrix
        When the determinant canonicalizes to zero.
    """
    n = len(m)
    det = determinant(m)
    if det == ZERO:
        raise SingularMassMatrix("singular mass matrix: determinant is identically zero", math.inf)
    inv_det = power(det, -1)
    if n == 1:
        return [mul(rhs[0], inv_det)]
    out = []
    for b in range(n):
        # replace column b by rhs
        cols = [[rhs[r] if c == b else m[r][c] for c in range(n)] for r in range(n)]
        out.append(mul(determinant(cols), inv_det))
    return out


def _split_affine(residuals: Sequence[Expr], placeholders: Sequence[Symbol]) -> List[Expr]:
    """Residuals with the placeholders set to zero."""
    zero = {p: ZERO for p in placeholders}
    return [substitute(r, zero) for r in residuals]


def acceleration_solution(sys: SystemDef) -> Optional[Dict[Symbol, Expr]]:
    """Closed-form accelerations ``d(d(q^a))`` for small systems, else ``None``."""
    el = euler_lagrange(sys)
    if sys.n > SYMBOLIC_SOLVE_LIMIT:
        return None
    rhs = [mul(Const(-1), r) for r in _split_affine(el.residuals, el.placeholders)]
    sol = solve_symbolic(el.mass, rhs)
    return dict(zip(sys.acc, sol))


# -- variational equations ----------------------------------------------------


def _raw_variational(sys: SystemDef) -> List[Expr]:
    """Term-by-term transcription of the Jacobi equations; ``d(d(q))`` left in place."""
    L = sys.lagrangian
    n = sys.n
    dv = [differentiate(L, v) for v in sys.v]
    dq = [differentiate(L, q) for q in sys.q]
    out = []
    for a in range(n):
        terms = []
        for b in range(n):
            m_ab = differentiate(dv[a], sys.v[b])
            vq_ab = differentiate(dv[a], sys.q[b])  # d2L / dv^a dq^b
            qv_ab = differentiate(dq[a], sys.v[b])  # d2L / dq^a dv^b
            qq_ab = differentiate(dq[a], sys.q[b])
            terms.append(mul(m_ab, sys.dev_acc[b]))
            w_coeff = add(total_time_derivative(m_ab), vq_ab, mul(Const(-1), qv_ab))
            terms.append(mul(w_coeff, sys.w[b]))
            e_coeff = add(total_time_derivative(vq_ab), mul(Const(-1), qq_ab))
            terms.append(mul(e_coeff, sys.eps[b]))
        out.append(add(*terms))
    return out


def _eliminate_accelerations(sys: SystemDef, exprs: List[Expr]) -> List[Expr]:
    sol = acceleration_solution(sys)
    if sol is None:
        return exprs
    return [substitute(e, sol) for e in exprs]


def variational_equations_direct(sys: SystemDef, eliminate: bool = True) -> ImplicitOde:
    """Variational equations from the explicit second-derivative formula.

    With ``eliminate`` (and at most :data:`SYMBOLIC_SOLVE_LIMIT` coordinates)
    accelerations of the base motion are replaced by their on-shell values,
    so the residuals are affine in ``d(d(eps(q)))`` alone.
    """
    res = _raw_variational(sys)
    if eliminate:
        res = _eliminate_accelerations(sys, res)
    return ImplicitOde(sys, tuple(res), mass_matrix(sys), tuple(sys.dev_acc))


def variational_equations_via_gamma(sys: SystemDef, eliminate: bool = True) -> ImplicitOde:
    """Variational equations as the Euler-Lagrange equations of gamma in ``q``."""
    gamma = prolong(sys).gamma
    res = _lagrange_operator(gamma, sys.q, sys.v)
    if eliminate:
        res = _eliminate_accelerations(sys, res)
    return ImplicitOde(sys, tuple(res), mass_matrix(sys), tuple(sys.dev_acc))


def euler_lagrange_of_gamma_in_eps(sys: SystemDef) -> List[Expr]:
    gamma = prolong(sys).gamma
    return _lagrange_operator(gamma, sys.eps, sys.w)


class OnShell:
    """Replace acceleration placeholders by their values along solutions.

    Symbolically when the system is small enough for closed-form solves;
    numerically through :meth:`complete` in every case.
    """

    def __init__(self, sys: SystemDef):
        self.system = sys
        self.mass = mass_matrix(sys)
        self._numeric = _compile_accelerations(sys, params_as_args=True)
        self.symbolic: Optional[Dict[Symbol, Expr]] = None
        if sys.n <= SYMBOLIC_SOLVE_LIMIT:
            acc = acceleration_solution(sys)
            var = variational_equations_direct(sys, eliminate=True)
            rhs = [mul(Const(-1), r) for r in _split_affine(var.residuals, var.placeholders)]
            dev = solve_symbolic(self.mass, rhs)
            self.symbolic = {**acc, **dict(zip(sys.dev_acc, dev))}

    @property
    def variables(self) -> List[Symbol]:
        from .symbolic import TIME

        return [TIME] + self.system.state_symbols + self.system.param_symbols

    def eliminate(self, e: Expr) -> Expr:
        if self.symbolic is None:
            return e
        return substitute(e, self.symbolic)

    def complete(self, binding: dict) -> dict:
        from .symbolic import TIME

        sys = self.system
        args = [binding.get(TIME, 0.0)] + [binding[s] for s in sys.state_symbols + sys.param_symbols]
        values = self._numeric(*args)
        out = dict(binding)
        out.update(zip(sys.acc + sys.dev_acc, values))
        return out


# -- explicit first-order form ----------------------------------------------------


def _solve_dense(m: List[List[float]], cols: List[List[float]]) -> List[List[float]]:
    """Solve ``m x = c`` for each column ``c``; singular or ill-conditioned ``m`` raises."""
    n = len(m)
    if n == 1:
        a = m[0][0]
        if a == 0.0 or not math.isfinite(a):
            raise SingularMassMatrix("singular mass matrix", math.inf)
        return [[c[0] / a] for c in cols]
    if n == 2:
        a, b = m[0]
        c, d = m[1]
        det = a * d - b * c
        norm = max(abs(a) + abs(c), abs(b) + abs(d))
        if det == 0.0 or not math.isfinite(det):
            raise SingularMassMatrix("singular mass matrix", math.inf)
        inv_norm = max(abs(d) + abs(c), abs(b) + abs(a)) / abs(det)
        cond = norm * inv_norm
        if cond > CONDITION_LIMIT:
            raise SingularMassMatrix(f"singular mass matrix (condition {cond:.3g})", cond)
        return [[(d * x - b * y) / det, (a * y - c * x) / det] for x, y in cols]
    # Gauss-Jordan with partial pivoting; the inverse gives the 1-norm condition.
    aug = [list(m[r]) + [1.0 if r == k else 0.0 for k in range(n)] for r in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(aug[r][col]))
        if aug[piv][col] == 0.0:
            raise SingularMassMatrix("singular mass matrix", math.inf)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        row = [x / p for x in aug[col]]
        aug[col] = row
        for r in range(n):
            if r != col and aug[r][col] != 0.0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], row)]
    inv = [r[n:] for r in aug]
    norm = max(sum(abs(m[r][c]) for r in range(n)) for c in range(n))
    inv_norm = max(sum(abs(inv[r][c]) for r in range(n)) for c in range(n))
    cond = norm * inv_norm
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularMassMatrix(f"singular mass matrix (condition {cond:.3g})", cond)
    return [[sum(inv[r][k] * c[k] for k in range(n)) for r in range(n)] for c in cols]


def _compile_accelerations(sys: SystemDef, params_as_args: bool, tangent: bool = True, as_rhs: bool = False):
    """Generate Python code computing the accelerations.

    The Euler-Lagrange and raw variational residuals are split into mass
    matrix and remainder; the generated function solves for ``d(d(q))``
    first and feeds the result into the variational remainder.
    """
    from .symbolic import TIME

    n = sys.n
    el = euler_lagrange(sys)
    mass = el.mass
    f_exprs = [mul(Const(-1), r) for r in _split_affine(el.residuals, el.placeholders)]
    g_exprs = []
    if tangent:
        raw = _raw_variational(sys)
        g_exprs = [mul(Const(-1), r) for r in _split_affine(raw, sys.dev_acc)]

    names: Dict[Symbol, str] = {TIME: "t"}
    state = sys.state_symbols if tangent else sys.q + sys.v
    for i, s in enumerate(state):
        names[s] = f"y{i}"
    for i, s in enumerate(sys.acc):
        names[s] = f"acc{i}"
    namespace = {"math": math, "_rpow": _rpow, "_solve": _solve_dense}
    params = sys.param_symbols
    for i, p in enumerate(params):
        names[p] = f"p{i}"
        if not params_as_args:
            namespace[f"p{i}"] = float(sys.params[p.name])

    def src(e: Expr) -> str:
        return python_source(e, names, "math")

    args = ["t", "y"] if as_rhs else ["t"] + [f"y{i}" for i in range(len(state))]
    if params_as_args:
        args += [f"p{i}" for i in range(len(params))]
    lines = [f"def _accel({', '.join(args)}):"]
    if as_rhs:
        lines.append(f"    {', '.join(f'y{i}' for i in range(len(state)))}, = y")
    matrix = "[" + ", ".join("[" + ", ".join(src(x) for x in row) + "]" for row in mass) + "]"
    lines.append(f"    _m = {matrix}")
    lines.append(f"    _f = [{', '.join(src(x) for x in f_exprs)}]")
    if tangent:
        lines.append("    (" + ", ".join(f"acc{i}" for i in range(n)) + ",), = _solve(_m, [_f])")
        lines.append(f"    _g = [{', '.join(src(x) for x in g_exprs)}]")
        lines.append("    (" + ", ".join(f"dacc{i}" for i in range(n)) + ",), = _solve(_m, [_g])")
    else:
        lines.append("    (" + ", ".join(f"acc{i}" for i in range(n)) + ",), = _solve(_m, [_f])")
    acc = [f"acc{i}" for i in range(n)]
    dacc = [f"dacc{i}" for i in range(n)] if tangent else []
    if as_rhs:
        v = [f"y{n + i}" for i in range(n)]
        out = v + acc
        if tangent:
            out += [f"y{3 * n + i}" for i in range(n)] + dacc
    else:
        out = acc + dacc
    lines.append(f"    return ({', '.join(out)},)")
    source = "\n".join(lines) + "\n"
    exec(compile(source, f"<{sys.name}>", "exec"), namespace)
    fn = namespace["_accel"]
    fn.source = source
    return fn


@dataclass(frozen=True)
class OdeSystem:
    """Explicit first-order dynamics ``y' = f(t, y)``.

    The combined state is laid out as ``[q^1..q^n, v^1..v^n, eps^1..eps^n,
    w^1..w^n]``; the base-only system (``tangent=False``) keeps the first
    two blocks.
    """

    system: SystemDef
    tangent: bool
    rhs: Callable

    @property
    def dimension(self) -> int:
        return (4 if self.tangent else 2) * self.system.n

    @property
    def labels(self) -> List[str]:
        c = self.system.coords
        blocks = ["q", "v", "eps", "w"] if self.tangent else ["q", "v"]
        return [f"{b}_{name}" for b in blocks for name in c]

    def __call__(self, t: float, y: Sequence[float]) -> tuple:
        return self.rhs(t, y)


def assemble_ode(sys: SystemDef, tangent: bool = True) -> OdeSystem:
    """Explicit right-hand side of the Euler-Lagrange (+ variational) equations.

    The mass matrix is evaluated numerically at every call and ``M v' = F``,
    ``M w' = G`` are solved in turn; an ill-conditioned ``M`` raises
    :class:`SingularMassMatrix`.
    """
    fn = _compile_accelerations(sys, params_as_args=False, tangent=tangent, as_rhs=True)
    return OdeSystem(sys, tangent, fn)
