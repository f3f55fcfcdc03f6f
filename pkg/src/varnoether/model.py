"""System-description files: parsing, validation and rendering.

A description names the coordinates, the parameters with their values, the
Lagrangian and any number of symmetry generators::

    system oscillator
    coords q
    param omega = 1.0
    lagrangian (1/2)*d(q)^2 - (1/2)*omega^2*q^2

    generator time_translation
    xi = 1

Expressions use ``d(q)`` for a velocity, ``eps(q)`` for a deviation and
``d(eps(q))`` for its velocity.  ``d(d(q))`` and ``d(d(eps(q)))`` are
accepted so rendered derivations parse back, but are rejected wherever a
definition is being declared.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .symbolic import (
    TIME,
    ZERO,
    Const,
    Expr,
    Kind,
    Symbol,
    add,
    func,
    mul,
    power,
    render,
)
from .symbolic.core import FUNCTIONS

KEYWORDS = ("system", "coords", "param", "lagrangian", "generator")
GENERATOR_KEYS = ("xi", "zeta", "eta", "gauge", "classical_gauge")
RESERVED = frozenset(("t", "d", "eps") + FUNCTIONS + KEYWORDS + GENERATOR_KEYS)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

_GENERATOR_FORBIDDEN = (
    Kind.VELOCITY,
    Kind.DEVIATION_VELOCITY,
    Kind.ACCELERATION,
    Kind.DEVIATION_ACCELERATION,
)


class ModelError(ValueError):
    """Invalid system description, with a 1-based source position."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}"


@dataclass(frozen=True)
class SystemDef:
    name: str
    coords: Tuple[str, ...]
    params: Dict[str, float]
    lagrangian: Expr

    @property
    def n(self) -> int:
        return len(self.coords)

    def _syms(self, kind: Kind) -> List[Symbol]:
        return [Symbol(kind, c, i) for i, c in enumerate(self.coords)]

    @property
    def q(self) -> List[Symbol]:
        return self._syms(Kind.COORDINATE)

    @property
    def v(self) -> List[Symbol]:
        return self._syms(Kind.VELOCITY)

    @property
    def eps(self) -> List[Symbol]:
        return self._syms(Kind.DEVIATION)

    @property
    def w(self) -> List[Symbol]:
        return self._syms(Kind.DEVIATION_VELOCITY)

    @property
    def acc(self) -> List[Symbol]:
        return self._syms(Kind.ACCELERATION)

    @property
    def dev_acc(self) -> List[Symbol]:
        return self._syms(Kind.DEVIATION_ACCELERATION)

    @property
    def state_symbols(self) -> List[Symbol]:
        """Layout of the combined state: q block, v block, eps block, w block."""
        return self.q + self.v + self.eps + self.w

    @property
    def param_symbols(self) -> List[Symbol]:
        return [Symbol(Kind.PARAMETER, p) for p in self.params]

    def param_binding(self) -> Dict[Symbol, float]:
        return {Symbol(Kind.PARAMETER, p): float(v) for p, v in self.params.items()}

    @property
    def time_dependent(self) -> bool:
        return TIME in self.lagrangian.free_symbols


@dataclass(frozen=True)
class Generator:
    """Infinitesimal data of a one-parameter transformation group."""

    name: str
    xi: Expr
    zeta: Tuple[Expr, ...]
    eta: Tuple[Expr, ...]
    gauge: Optional[Expr] = None
    classical_gauge: Optional[Expr] = None

    @property
    def gauge_or_zero(self) -> Expr:
        return self.gauge if self.gauge is not None else ZERO

    @property
    def classical_gauge_or_zero(self) -> Expr:
        return self.classical_gauge if self.classical_gauge is not None else ZERO

    def expressions(self) -> List[Expr]:
        out = [self.xi, *self.zeta, *self.eta]
        out += [g for g in (self.gauge, self.classical_gauge) if g is not None]
        return out


@dataclass(frozen=True)
class InitialState:
    t0: float
    values: Dict[str, Tuple[float, float, float, float]]

    def vector(self, sys: SystemDef) -> List[float]:
        """Combined state in the documented ``[q, v, eps, w]`` block layout."""
        rows = [self.values[c] for c in sys.coords]
        return [r[k] for k in range(4) for r in rows]


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),=]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int, col0: int) -> List[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ModelError(f"unexpected character {text[bad]!r}", line, col0 + bad)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), line, col0 + start))
        pos = m.end()
    toks.append(_Tok("end", "", line, col0 + len(text.rstrip()) + (1 if text.strip() else 0)))
    return toks


# -- expression parser -------------------------------------------------------


class _ExprParser:
    """Recursive descent over ``+ - * / ^`` with right-associative ``^``."""

    def __init__(self, toks: List[_Tok], coords: Dict[str, int], params: set):
        self.toks = toks
        self.i = 0
        self.coords = coords
        self.params = params

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def _expect(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text or t.kind == "end":
            found = "end of line" if t.kind == "end" else repr(t.text)
            raise ModelError(f"expected {text!r}, found {found}", t.line, t.col)
        return self._advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ModelError(f"unexpected {self.tok.text!r}", self.tok.line, self.tok.col)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self._advance().text
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, mul(Const(-1), rhs))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self._advance()
            rhs = self.unary()
            if op.text == "*":
                e = mul(e, rhs)
            else:
                if rhs == ZERO:
                    raise ModelError("division by zero", op.line, op.col)
                e = mul(e, power(rhs, -1))
        return e

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in ("-", "+"):
            op = self._advance().text
            e = self.unary()
            return mul(Const(-1), e) if op == "-" else e
        return self.pow()

    def pow(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            caret = self._advance()
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise ModelError("exponent must be a rational constant", caret.line, caret.col + 1)
            if base == ZERO and exponent.value < 0:
                raise ModelError("division by zero", caret.line, caret.col)
            return power(base, exponent.value)
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self._advance()
            return Const(Fraction(t.text))
        if t.kind == "op" and t.text == "(":
            self._advance()
            e = self.expr()
            self._expect(")")
            return e
        if t.kind == "ident":
            self._advance()
            if t.text in ("d", "eps"):
                self._expect("(")
                s = self._derivative_arg(t)
                self._expect(")")
                return s
            if t.text in FUNCTIONS:
                self._expect("(")
                e = self.expr()
                self._expect(")")
                return func(t.text, e)
            if t.text == "t":
                return TIME
            if t.text in self.coords:
                return Symbol(Kind.COORDINATE, t.text, self.coords[t.text])
            if t.text in self.params:
                return Symbol(Kind.PARAMETER, t.text)
            raise ModelError(f"unknown identifier {t.text}", t.line, t.col)
        found = "end of line" if t.kind == "end" else repr(t.text)
        raise ModelError(f"expected an expression, found {found}", t.line, t.col)

    def _derivative_arg(self, head: _Tok) -> Symbol:
        t = self.tok
        if t.kind != "ident":
            raise ModelError(f"{head.text}() takes a coordinate", t.line, t.col)
        self._advance()
        if head.text == "eps":
            return Symbol(Kind.DEVIATION, *self._coord(t))
        # head is d(...)
        if t.text in ("d", "eps"):
            self._expect("(")
            inner = self._derivative_arg(t)
            self._expect(")")
            shift = {
                Kind.COORDINATE: Kind.VELOCITY,
                Kind.VELOCITY: Kind.ACCELERATION,
                Kind.DEVIATION: Kind.DEVIATION_VELOCITY,
                Kind.DEVIATION_VELOCITY: Kind.DEVIATION_ACCELERATION,
            }
            if inner.kind not in shift:
                raise ModelError("derivatives above second order are not supported", t.line, t.col)
            return Symbol(shift[inner.kind], inner.name, inner.index)
        return Symbol(Kind.VELOCITY, *self._coord(t))

    def _coord(self, t: _Tok) -> tuple:
        if t.text not in self.coords:
            raise ModelError(f"unknown coordinate {t.text}", t.line, t.col)
        return t.text, self.coords[t.text]


def parse_expression(text: str, coords=(), params=(), line: int = 1, column: int = 1) -> Expr:
    """Parse one expression in the DSL grammar."""
    coord_index = {c: i for i, c in enumerate(coords)}
    return _ExprParser(_tokenize(text, line, column), coord_index, set(params)).parse()


# -- statements --------------------------------------------------------------


@dataclass
class _Stmt:
    keyword: str
    line: int
    col: int
    words: List[Tuple[str, int]]  # identifiers after the keyword, with columns
    rhs: Optional[Tuple[str, int]] = None  # expression text and its column


def _split_statement(raw: str, lineno: int) -> Optional[_Stmt]:
    text = raw.split("#", 1)[0]
    if not text.strip():
        return None
    lead = len(text) - len(text.lstrip())
    m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[lead:])
    if not m:
        raise ModelError("expected a keyword", lineno, lead + 1)
    keyword = m.group(0)
    pos = lead + m.end()
    rest = text[pos:]
    if keyword == "lagrangian":
        return _Stmt(keyword, lineno, lead + 1, [], _strip_rhs(rest, pos + 1))
    words = []
    rhs = None
    eq = rest.find("=")
    head = rest if eq < 0 else rest[:eq]
    for w in re.finditer(r"\S+", head):
        words.append((w.group(0), pos + w.start() + 1))
    if eq >= 0:
        rhs = _strip_rhs(rest[eq + 1 :], pos + eq + 2)
    return _Stmt(keyword, lineno, lead + 1, words, rhs)


def _strip_rhs(text: str, col: int) -> Tuple[str, int]:
    """Drop leading blanks so the column points at the expression itself."""
    body = text.lstrip()
    return body, col + len(text) - len(body)


def _check_ident(word: str, line: int, col: int, what: str) -> None:
    if not _IDENT.match(word):
        raise ModelError(f"invalid {what} name {word!r}", line, col)
    if word in RESERVED:
        raise ModelError(f"{word!r} is a reserved word", line, col)


def parse_system(text: str) -> Tuple[SystemDef, List[Generator]]:
    """Parse and validate a system description.

    Raises
    ------
    ModelError
        With the 1-based line and column of the offending token.
    """
    stmts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        st = _split_statement(raw, lineno)
        if st is not None:
            stmts.append(st)

    name = None
    coords: List[str] = []
    params: Dict[str, float] = {}
    param_stmts: List[_Stmt] = []
    lagrangian_stmt = None
    gen_blocks: List[Tuple[_Stmt, List[_Stmt]]] = []

    for st in stmts:
        kw = st.keyword
        if kw in GENERATOR_KEYS:
            if not gen_blocks:
                raise ModelError(f"{kw!r} outside a generator block", st.line, st.col)
            gen_blocks[-1][1].append(st)
            continue
        if kw not in KEYWORDS:
            raise ModelError(f"unknown keyword {kw!r}", st.line, st.col)
        if gen_blocks and kw != "generator":
            raise ModelError(f"{kw!r} must precede the generator blocks", st.line, st.col)
        if kw == "system":
            if name is not None:
                raise ModelError("duplicate system statement", st.line, st.col)
            if len(st.words) != 1 or st.rhs is not None:
                raise ModelError("expected 'system <name>'", st.line, st.col)
            word, col = st.words[0]
            _check_ident(word, st.line, col, "system")
            name = word
        elif kw == "coords":
            if coords:
                raise ModelError("duplicate coords statement", st.line, st.col)
            if not st.words or st.rhs is not None:
                raise ModelError("expected 'coords <name> ...'", st.line, st.col)
            for word, col in st.words:
                for piece in filter(None, word.split(",")):
                    _check_ident(piece, st.line, col, "coordinate")
                    if piece in coords:
                        raise ModelError(f"duplicate name {piece}", st.line, col)
                    coords.append(piece)
        elif kw == "param":
            if len(st.words) != 1 or st.rhs is None:
                raise ModelError("expected 'param <name> = <value>'", st.line, st.col)
            param_stmts.append(st)
        elif kw == "lagrangian":
            if lagrangian_stmt is not None:
                raise ModelError("duplicate lagrangian statement", st.line, st.col)
            lagrangian_stmt = st
        elif kw == "generator":
            if len(st.words) != 1 or st.rhs is not None:
                raise ModelError("expected 'generator <name>'", st.line, st.col)
            gen_blocks.append((st, []))

    if name is None:
        raise ModelError("missing 'system <name>' statement", 1, 1)
    if not coords:
        raise ModelError("missing 'coords' statement", 1, 1)
    if lagrangian_stmt is None:
        raise ModelError("missing 'lagrangian' statement", 1, 1)

    for st in param_stmts:
        word, col = st.words[0]
        _check_ident(word, st.line, col, "parameter")
        if word in coords or word in params:
            raise ModelError(f"duplicate name {word}", st.line, col)
        value = parse_expression(st.rhs[0], line=st.line, column=st.rhs[1])
        if not isinstance(value, Const):
            raise ModelError("parameter value must be a number", st.line, st.rhs[1])
        params[word] = float(value.value)

    def expr(st: _Stmt) -> Expr:
        text, col = st.rhs
        return parse_expression(text, coords, params, st.line, col)

    lagrangian = expr(lagrangian_stmt)
    bad = [s for s in lagrangian.free_symbols if s.kind not in (Kind.TIME, Kind.PARAMETER, Kind.COORDINATE, Kind.VELOCITY)]
    if bad:
        raise ModelError(
            "lagrangian may depend only on t, coordinates, velocities and parameters",
            lagrangian_stmt.line,
            lagrangian_stmt.rhs[1],
        )
    sys = SystemDef(name, tuple(coords), params, lagrangian)
    gens = [_build_generator(head, body, sys, expr) for head, body in gen_blocks]
    seen = set()
    for (head, _), g in zip(gen_blocks, gens):
        if g.name in seen:
            raise ModelError(f"duplicate name {g.name}", head.line, head.words[0][1])
        seen.add(g.name)
    return sys, gens


def _build_generator(head: _Stmt, body: List[_Stmt], sys: SystemDef, expr) -> Generator:
    gname, gcol = head.words[0]
    _check_ident(gname, head.line, gcol, "generator")
    index = {c: i for i, c in enumerate(sys.coords)}
    xi = None
    zeta: Dict[int, Expr] = {}
    eta: Dict[int, Expr] = {}
    gauge = classical = None
    for st in body:
        if st.rhs is None:
            raise ModelError(f"expected '{st.keyword} ... = <expression>'", st.line, st.col)
        value = expr(st)
        if st.keyword in ("zeta", "eta"):
            if len(st.words) != 1:
                raise ModelError(f"expected '{st.keyword} <coordinate> = <expression>'", st.line, st.col)
            cname, ccol = st.words[0]
            if cname not in index:
                raise ModelError(f"unknown coordinate {cname}", st.line, ccol)
            table = zeta if st.keyword == "zeta" else eta
            if index[cname] in table:
                raise ModelError(f"duplicate {st.keyword} for {cname}", st.line, ccol)
            _forbid_velocities(value, st)
            table[index[cname]] = value
            continue
        if st.words:
            raise ModelError(f"expected '{st.keyword} = <expression>'", st.line, st.words[0][1])
        if st.keyword == "xi":
            if xi is not None:
                raise ModelError("duplicate xi", st.line, st.col)
            _forbid_velocities(value, st)
            xi = value
        elif st.keyword == "gauge":
            if gauge is not None:
                raise ModelError("duplicate gauge", st.line, st.col)
            if any(s.kind in (Kind.ACCELERATION, Kind.DEVIATION_ACCELERATION) for s in value.free_symbols):
                raise ModelError("gauge may not depend on accelerations", st.line, st.rhs[1])
            gauge = value
        else:
            if classical is not None:
                raise ModelError("duplicate classical_gauge", st.line, st.col)
            if any(s.kind not in (Kind.TIME, Kind.PARAMETER, Kind.COORDINATE, Kind.VELOCITY) for s in value.free_symbols):
                raise ModelError("classical_gauge may not depend on deviations or accelerations", st.line, st.rhs[1])
            classical = value
    n = sys.n
    zeta_t = tuple(zeta.get(i, ZERO) for i in range(n))
    eta_t = tuple(eta.get(i, zeta_t[i]) for i in range(n))
    return Generator(gname, xi if xi is not None else ZERO, zeta_t, eta_t, gauge, classical)


def _forbid_velocities(value: Expr, st: _Stmt) -> None:
    if any(s.kind in _GENERATOR_FORBIDDEN for s in value.free_symbols):
        raise ModelError("velocity dependence forbidden in generators", st.line, st.rhs[1])


def render_system(sys: SystemDef, generators: List[Generator] = ()) -> str:
    """Render a definition back to DSL text; ``parse_system`` inverts it."""
    lines = [f"system {sys.name}", "coords " + " ".join(sys.coords)]
    for p, v in sys.params.items():
        lines.append(f"param {p} = {float(v)!r}")
    lines.append(f"lagrangian {render(sys.lagrangian)}")
    for g in generators:
        lines += ["", f"generator {g.name}", f"xi = {render(g.xi)}"]
        for c, z in zip(sys.coords, g.zeta):
            lines.append(f"zeta {c} = {render(z)}")
        for c, e in zip(sys.coords, g.eta):
            lines.append(f"eta {c} = {render(e)}")
        if g.gauge is not None:
            lines.append(f"gauge = {render(g.gauge)}")
        if g.classical_gauge is not None:
            lines.append(f"classical_gauge = {render(g.classical_gauge)}")
    return "\n".join(lines) + "\n"


# -- initial states ------------------------------------------------------------


def _locate(text: str, needle: str) -> Tuple[int, int]:
    idx = text.find(needle)
    if idx < 0:
        return 1, 1
    line = text.count("\n", 0, idx) + 1
    return line, idx - (text.rfind("\n", 0, idx) + 1) + 1


def _number(value, text: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(f"non-numeric value for {key}: {value!r}", *_locate(text, f'"{key}"'))
    return float(value)


def parse_initial_state(text: str, sys: SystemDef) -> InitialState:
    """Parse a JSON initial state ``{"t0": 0, "<coord>": [q0, v0, eps0, w0]}``.

    Trailing entries of each array may be omitted and default to zero.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed initial state: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(obj, dict):
        raise ModelError("initial state must be an object", 1, 1)
    t0 = _number(obj.get("t0", 0.0), text, "t0")
    values = {}
    for key, arr in obj.items():
        if key == "t0":
            continue
        if key not in sys.coords:
            raise ModelError(f"unknown coordinate {key}", *_locate(text, f'"{key}"'))
        if not isinstance(arr, list) or not 1 <= len(arr) <= 4:
            raise ModelError(f"{key} needs an array of 1 to 4 numbers", *_locate(text, f'"{key}"'))
        nums = [_number(x, text, key) for x in arr] + [0.0] * (4 - len(arr))
        values[key] = tuple(nums)
    missing = [c for c in sys.coords if c not in values]
    if missing:
        raise ModelError(f"missing coordinate {missing[0]}", 1, 1)
    return InitialState(t0, values)
