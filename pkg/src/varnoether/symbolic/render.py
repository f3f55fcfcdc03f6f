"""Text rendering of expressions: the system DSL and Python source."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Mapping

from .core import Add, Const, Expr, Func, Kind, Mul, Pow, Symbol

_SUM, _PRODUCT, _UNARY, _POWER, _ATOM = range(1, 6)

_SYMBOL_FORMS = {
    Kind.TIME: "{name}",
    Kind.PARAMETER: "{name}",
    Kind.COORDINATE: "{name}",
    Kind.VELOCITY: "d({name})",
    Kind.DEVIATION: "eps({name})",
    Kind.DEVIATION_VELOCITY: "d(eps({name}))",
    Kind.ACCELERATION: "d(d({name}))",
    Kind.DEVIATION_ACCELERATION: "d(d(eps({name})))",
}


def symbol_text(s: Symbol) -> str:
    return _SYMBOL_FORMS[s.kind].format(name=s.name)


def _fraction_text(v: Fraction) -> tuple:
    if v.denominator == 1:
        return str(v.numerator), (_UNARY if v < 0 else _ATOM)
    return f"{v.numerator}/{v.denominator}", (_UNARY if v < 0 else _PRODUCT)


def _wrap(text: str, prec: int, need: int) -> str:
    return f"({text})" if prec < need else text


def _exponent_text(e: Fraction) -> str:
    if e.denominator == 1 and e > 0:
        return str(e.numerator)
    return f"({_fraction_text(e)[0]})"


def _render(e: Expr, sym: Callable[[Symbol], str]) -> tuple:
    """Return ``(text, precedence)``."""
    if isinstance(e, Const):
        return _fraction_text(e.value)
    if isinstance(e, Symbol):
        return sym(e), _ATOM
    if isinstance(e, Func):
        return f"{e.name}({_render(e.arg, sym)[0]})", _ATOM
    if isinstance(e, Pow):
        text, prec = _render(e.base, sym)
        return f"{_wrap(text, prec, _ATOM)}^{_exponent_text(e.exp)}", _POWER
    if isinstance(e, Mul):
        body = "*".join(_wrap(*_render(f, sym), _POWER) for f in e.factors)
        c = e.coeff
        if c == 1:
            return body, _PRODUCT
        if c == -1:
            return "-" + body, _UNARY
        mag = abs(c)
        head = str(mag) if mag.denominator == 1 else f"({mag.numerator}/{mag.denominator})"
        return ("-" if c < 0 else "") + head + "*" + body, (_UNARY if c < 0 else _PRODUCT)
    if isinstance(e, Add):
        pieces = []
        for i, t in enumerate(e.terms):
            negative = (isinstance(t, Const) and t.value < 0) or (isinstance(t, Mul) and t.coeff < 0)
            if i == 0:
                pieces.append(_render(t, sym)[0])
            elif negative:
                pieces.append(" - " + _render(-t, sym)[0])
            else:
                pieces.append(" + " + _render(t, sym)[0])
        return "".join(pieces), _SUM
    raise TypeError(f"cannot render {type(e).__name__}")


def render(e: Expr) -> str:
    """Render in the system-description grammar; parsing the result gives ``e`` back."""
    return _render(e, symbol_text)[0]


# -- Python source ------------------------------------------------------------


def python_source(e: Expr, names: Mapping[Symbol, str], lib: str = "math") -> str:
    """Python expression text for ``e`` with symbols replaced by ``names``.

    ``lib`` is the module alias providing ``sin``, ``cos``, ... (``math`` or
    ``np``).  Non-integer powers route through ``_rpow`` so that a negative
    base fails loudly instead of turning complex.
    """
    fn_names = {"ln": "log"}

    def walk(node: Expr) -> str:
        if isinstance(node, Const):
            return repr(float(node.value))
        if isinstance(node, Symbol):
            return names[node]
        if isinstance(node, Func):
            return f"{lib}.{fn_names.get(node.name, node.name)}({walk(node.arg)})"
        if isinstance(node, Pow):
            base = walk(node.base)
            if node.exp.denominator == 1:
                return f"({base})**{node.exp.numerator}" if node.exp > 0 else f"({base})**({node.exp.numerator})"
            return f"_rpow({base}, {float(node.exp)!r})"
        if isinstance(node, Mul):
            parts = [walk(f) for f in node.factors]
            if node.coeff != 1:
                parts.insert(0, repr(float(node.coeff)))
            return "(" + "*".join(parts) + ")"
        if isinstance(node, Add):
            return "(" + " + ".join(walk(t) for t in node.terms) + ")"
        raise TypeError(type(node).__name__)

    return walk(e)
