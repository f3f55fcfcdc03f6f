"""Numeric evaluation, compilation to Python callables, and the zero test."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import Add, Const, Expr, Func, Mul, Pow, Symbol, simplify, ZERO
from .render import python_source, symbol_text

#: Seed used by :func:`is_zero` unless the caller passes another one.
DEFAULT_SEED = 1729
DEFAULT_TRIALS = 100
DEFAULT_TOL = 1e-9
MAX_REDRAWS = 10


class DomainError(ValueError):
    """Evaluation left the domain of a function (ln, sqrt, x^(1/2), 1/0)."""


class UnboundSymbolError(KeyError):
    def __init__(self, symbol: Symbol):
        super().__init__(symbol)
        self.symbol = symbol

    def __str__(self):
        return f"unbound symbol {symbol_text(self.symbol)}"


_MATH = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt}


def evaluate(e: Expr, binding: Mapping[Symbol, float]) -> float:
    """Evaluate ``e`` at ``binding`` in double precision."""
    memo: dict = {}

    def ev(node: Expr) -> float:
        if isinstance(node, Const):
            return float(node.value)
        if isinstance(node, Symbol):
            try:
                return float(binding[node])
            except KeyError:
                raise UnboundSymbolError(node) from None
        hit = memo.get(node)
        if hit is not None:
            return hit
        try:
            if isinstance(node, Add):
                out = math.fsum(ev(t) for t in node.terms)
            elif isinstance(node, Mul):
                out = float(node.coeff)
                for f in node.factors:
                    out *= ev(f)
            elif isinstance(node, Pow):
                out = _rpow(ev(node.base), node.exp)
            elif isinstance(node, Func):
                out = _MATH[node.name](ev(node.arg))
            else:  # pragma: no cover
                raise TypeError(type(node).__name__)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"{exc} in {node}") from None
        memo[node] = out
        return out

    return ev(e)


def _rpow(base: float, exp) -> float:
    if base < 0 and float(exp) != int(exp):
        raise DomainError(f"negative base {base} raised to non-integer power")
    if base == 0 and exp < 0:
        raise DomainError("division by zero")
    if float(exp) == int(exp):
        return base ** int(exp)
    return base ** float(exp)


def _np_rpow(base, exp):
    return np.power(base, exp)


def compile_exprs(exprs: Sequence[Expr], args: Sequence[Symbol], vectorized: bool = False) -> Callable:
    """Compile expressions to one Python function of ``args``.

    The function returns a tuple with one value per expression.  With
    ``vectorized=True`` arguments may be numpy arrays and evaluation is
    elementwise; otherwise plain floats and the ``math`` module are used,
    so domain violations raise instead of producing NaN.
    """
    names = {s: f"a{i}" for i, s in enumerate(args)}
    lib = "np" if vectorized else "math"
    missing = set().union(*(e.free_symbols for e in exprs)) - set(names) if exprs else set()
    if missing:
        raise UnboundSymbolError(sorted(missing)[0])
    body = ", ".join(python_source(e, names, lib) for e in exprs)
    src = f"def _compiled({', '.join(names.values())}):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    namespace = {"math": math, "np": np, "_rpow": _np_rpow if vectorized else _rpow}
    exec(compile(src, "<varnoether>", "exec"), namespace)
    fn = namespace["_compiled"]
    fn.source = src
    return fn


class Verdict(enum.Enum):
    SYMBOLIC_ZERO = "SymbolicZero"
    NUMERICALLY_ZERO = "NumericallyZero"
    NONZERO = "NonZero"

    @property
    def is_zero(self) -> bool:
        return self is not Verdict.NONZERO

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ZeroTest:
    verdict: Verdict
    max_abs: float = 0.0
    witness: Optional[dict] = field(default=None, compare=False)
    witness_value: Optional[float] = None


def is_zero(
    e: Expr,
    trials: int = DEFAULT_TRIALS,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    complete: Optional[Callable[[dict], dict]] = None,
    variables: Sequence[Symbol] = (),
) -> ZeroTest:
    """Decide whether ``e`` vanishes identically.

    The canonical form equal to ``0`` gives ``SYMBOLIC_ZERO``.  Otherwise
    ``e`` is evaluated at ``trials`` bindings drawn uniformly from [-1, 1]
    for each free symbol.  ``complete`` may extend each drawn binding with
    derived values (on-shell accelerations, say); ``variables`` lists extra
    symbols to draw that ``complete`` needs but ``e`` lacks.  A trial that
    hits a domain error is redrawn, at most ``MAX_REDRAWS`` times.
    """
    if trials < 1 or tol <= 0:
        raise ValueError("need trials >= 1 and tol > 0")
    e = simplify(e)
    if e == ZERO:
        return ZeroTest(Verdict.SYMBOLIC_ZERO)
    rng = random.Random(seed)
    free = sorted(e.free_symbols | set(variables))
    worst = 0.0
    for _ in range(trials):
        for attempt in range(MAX_REDRAWS + 1):
            binding = {s: rng.uniform(-1.0, 1.0) for s in free}
            try:
                if complete is not None:
                    binding = complete(binding)
                value = evaluate(e, binding)
            except (DomainError, ArithmeticError, np.linalg.LinAlgError):
                continue
            if math.isfinite(value):
                break
        else:
            raise DomainError(f"no admissible binding after {MAX_REDRAWS} redraws for {e}")
        if abs(value) > tol:
            return ZeroTest(Verdict.NONZERO, abs(value), dict(binding), value)
        worst = max(worst, abs(value))
    return ZeroTest(Verdict.NUMERICALLY_ZERO, worst)
