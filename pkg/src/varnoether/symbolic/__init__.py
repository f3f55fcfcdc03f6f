"""Exact symbolic algebra over mechanical variables."""

from .calculus import (
    AccelerationError,
    acceleration,
    coordinate,
    deviation,
    deviation_acceleration,
    deviation_velocity,
    differentiate,
    parameter,
    total_time_derivative,
    velocity,
)
from .core import (
    MINUS_ONE,
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
    const,
    func,
    mul,
    power,
    simplify,
    substitute,
)
from .numeric import (
    DEFAULT_SEED,
    DomainError,
    UnboundSymbolError,
    Verdict,
    ZeroTest,
    compile_exprs,
    evaluate,
    is_zero,
)
from .render import render, symbol_text

__all__ = [name for name in dir() if not name.startswith("_")]
