"""Partial and total time derivatives of canonical expressions."""

from __future__ import annotations

from fractions import Fraction

from .core import (
    ONE,
    TIME,
    ZERO,
    Add,
    Const,
    Expr,
    Func,
    Kind,
    Mul,
    Pow,
    Symbol,
    add,
    func,
    mul,
    power,
)

# kind of s  ->  kind of ds/dt
_TIME_SHIFT = {
    Kind.COORDINATE: Kind.VELOCITY,
    Kind.VELOCITY: Kind.ACCELERATION,
    Kind.DEVIATION: Kind.DEVIATION_VELOCITY,
    Kind.DEVIATION_VELOCITY: Kind.DEVIATION_ACCELERATION,
}

PLACEHOLDER_KINDS = (Kind.ACCELERATION, Kind.DEVIATION_ACCELERATION)


class AccelerationError(ValueError):
    """Raised when a total time derivative would need third derivatives."""


def coordinate(name: str, index: int = 0) -> Symbol:
    return Symbol(Kind.COORDINATE, name, index)


def velocity(name: str, index: int = 0) -> Symbol:
    return Symbol(Kind.VELOCITY, name, index)


def deviation(name: str, index: int = 0) -> Symbol:
    return Symbol(Kind.DEVIATION, name, index)


def deviation_velocity(name: str, index: int = 0) -> Symbol:
    return Symbol(Kind.DEVIATION_VELOCITY, name, index)


def acceleration(name: str, index: int = 0) -> Symbol:
    return Symbol(Kind.ACCELERATION, name, index)


def deviation_acceleration(name: str, index: int = 0) -> Symbol:
    return Symbol(Kind.DEVIATION_ACCELERATION, name, index)


def parameter(name: str) -> Symbol:
    return Symbol(Kind.PARAMETER, name)


def time_derivative_symbol(s: Symbol) -> Symbol:
    """The symbol standing for ``ds/dt`` (``q -> d(q)`` and so on)."""
    return Symbol(_TIME_SHIFT[s.kind], s.name, s.index)


def differentiate(e: Expr, s: Symbol) -> Expr:
    """Partial derivative of ``e`` with respect to ``s``, all other symbols held fixed."""
    cache: dict = {}

    def d(node: Expr) -> Expr:
        if s not in node.free_symbols:
            return ZERO
        if isinstance(node, Symbol):
            return ONE
        hit = cache.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Add):
            out = add(*(d(t) for t in node.terms))
        elif isinstance(node, Mul):
            parts = []
            factors = node.factors
            for i, f in enumerate(factors):
                df = d(f)
                if df == ZERO:
                    continue
                rest = factors[:i] + factors[i + 1 :]
                parts.append(mul(Const(node.coeff), df, *rest))
            out = add(*parts)
        elif isinstance(node, Pow):
            out = mul(Const(node.exp), power(node.base, node.exp - 1), d(node.base))
        elif isinstance(node, Func):
            out = mul(_outer_derivative(node), d(node.arg))
        else:  # pragma: no cover - Const has no free symbols
            out = ZERO
        cache[node] = out
        return out

    return d(e)


def _outer_derivative(f: Func) -> Expr:
    u = f.arg
    if f.name == "sin":
        return func("cos", u)
    if f.name == "cos":
        return mul(Const(-1), func("sin", u))
    if f.name == "exp":
        return f
    if f.name == "ln":
        return power(u, -1)
    if f.name == "sqrt":
        return mul(Const(Fraction(1, 2)), power(f, -1))
    raise ValueError(f"no derivative rule for {f.name}")


def total_time_derivative(e: Expr) -> Expr:
    """Total derivative ``D e`` along a curve.

    Coordinates advance to velocities, velocities to acceleration placeholders
    and likewise for deviations; ``t`` contributes its explicit partial.
    """
    syms = e.free_symbols
    if any(s.kind in PLACEHOLDER_KINDS for s in syms):
        raise AccelerationError("expression already contains acceleration placeholders")
    parts = []
    for s in sorted(syms):
        if s.kind == Kind.TIME:
            parts.append(differentiate(e, s))
        elif s.kind in _TIME_SHIFT:
            parts.append(mul(time_derivative_symbol(s), differentiate(e, s)))
    return add(*parts)


def explicit_time_dependence(e: Expr) -> bool:
    return TIME in e.free_symbols


def hessian_entry(e: Expr, a: Symbol, b: Symbol) -> Expr:
    return differentiate(differentiate(e, a), b)
