"""Immutable expression trees kept in canonical form.

Every node is built through the smart constructors :func:`add`, :func:`mul`,
:func:`power` and :func:`func`; they flatten, fold exact rational constants,
merge like terms and like bases, expand products of sums and sort operands
under one deterministic total order.  Structural equality of two canonical
trees is therefore a (sufficient, not necessary) test of mathematical
equality.
"""

from __future__ import annotations

import enum
import math
from fractions import Fraction
from typing import Iterable, Mapping, Union

Number = Union[int, Fraction]


class Kind(enum.IntEnum):
    """Symbol kinds, in their sort order."""

    TIME = 0
    PARAMETER = 1
    COORDINATE = 2
    VELOCITY = 3
    DEVIATION = 4
    DEVIATION_VELOCITY = 5
    ACCELERATION = 6
    DEVIATION_ACCELERATION = 7


FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")


class Expr:
    """Base class of all expression nodes.  Never instantiate directly."""

    __slots__ = ("_key", "_hash", "_free")

    def _init(self, key):
        self._key = key
        self._hash = hash(key)
        self._free = None

    @property
    def key(self):
        """Sort key; injective on canonical nodes."""
        return self._key

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return self._hash == other._hash and self._key == other._key

    def __lt__(self, other):
        return self._key < other._key

    def __repr__(self):
        from .render import render

        return f"<{type(self).__name__} {render(self)}>"

    def __str__(self):
        from .render import render

        return render(self)

    # arithmetic sugar, mostly for tests and derivations
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, mul(MINUS_ONE, _coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), mul(MINUS_ONE, self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return mul(self, power(_coerce(other), -1))

    def __rtruediv__(self, other):
        return mul(_coerce(other), power(self, -1))

    def __neg__(self):
        return mul(MINUS_ONE, self)

    def __pow__(self, exponent):
        if isinstance(exponent, Const):
            exponent = exponent.value
        return power(self, exponent)

    @property
    def free_symbols(self) -> frozenset:
        if self._free is None:
            self._free = frozenset(self._collect_symbols())
        return self._free

    def _collect_symbols(self):
        out = set()
        for child in self.children():
            out |= child.free_symbols
        return out

    def children(self) -> tuple:
        return ()

    def is_constant(self) -> bool:
        return isinstance(self, Const)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        self.value = Fraction(value)
        self._init((0, (self.value,)))


class Symbol(Expr):
    __slots__ = ("kind", "name", "index")

    def __init__(self, kind: Kind, name: str, index: int = 0):
        self.kind = Kind(kind)
        self.name = name
        self.index = index
        self._init((3, (int(self.kind), name, index)))

    def _collect_symbols(self):
        return {self}


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        self.name = name
        self.arg = arg
        self._init((2, (name, arg.key)))

    def children(self):
        return (self.arg,)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Number):
        self.base = base
        self.exp = Fraction(exp)
        self._init(base.key + (self.exp,))

    def children(self):
        return (self.base,)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        self.terms = terms
        self._init((1, tuple(t.key for t in terms)))

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("coeff", "factors")

    def __init__(self, coeff: Number, factors: tuple):
        self.coeff = Fraction(coeff)
        self.factors = factors
        self._init((4, tuple(f.key for f in factors), self.coeff))

    def children(self):
        return self.factors


ZERO = Const(0)
ONE = Const(1)
MINUS_ONE = Const(-1)
TIME = Symbol(Kind.TIME, "t")


def const(value: Number) -> Const:
    return Const(value)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Const(value)
    if isinstance(value, float):
        return Const(Fraction(value).limit_denominator(10**12))
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


# -- term / factor decomposition -------------------------------------------


def _split_term(term: Expr) -> tuple:
    """Return ``(coefficient, factors)`` of a canonical non-sum term."""
    if isinstance(term, Const):
        return term.value, ()
    if isinstance(term, Mul):
        return term.coeff, term.factors
    return Fraction(1), (term,)


def _build_term(coeff: Fraction, factors: tuple) -> Expr:
    if coeff == 0:
        return ZERO
    if not factors:
        return Const(coeff)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    return Mul(coeff, factors)


def _term_order(term: Expr):
    coeff, factors = _split_term(term)
    return tuple(f.key for f in reversed(factors)), coeff


def _base_exp(factor: Expr) -> tuple:
    if isinstance(factor, Pow):
        return factor.base, factor.exp
    return factor, Fraction(1)


# -- exact rational roots -----------------------------------------------------


def _int_root(n: int, k: int):
    if n < 0:
        if k % 2 == 0:
            return None
        r = _int_root(-n, k)
        return None if r is None else -r
    if n < 2:
        return n
    # integer Newton iteration from above; exact for any size
    r = 1 << -(-n.bit_length() // k)
    while True:
        nxt = ((k - 1) * r + n // r ** (k - 1)) // k
        if nxt >= r:
            break
        r = nxt
    return r if r**k == n else None


def _rational_power(base: Fraction, exp: Fraction):
    """Exact ``base**exp`` or ``None`` when irrational."""
    if exp.denominator == 1:
        return base ** int(exp)
    if base < 0:
        return None
    num = _int_root(base.numerator, exp.denominator)
    den = _int_root(base.denominator, exp.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den) ** exp.numerator


# -- smart constructors -------------------------------------------------------


def add(*args: Expr) -> Expr:
    """Canonical sum of the arguments."""
    acc: dict = {}
    stack = list(args)
    while stack:
        a = stack.pop()
        if isinstance(a, Add):
            stack.extend(a.terms)
            continue
        coeff, factors = _split_term(a)
        if coeff:
            acc[factors] = acc.get(factors, 0) + coeff
    terms = [_build_term(c, fs) for fs, c in acc.items() if c != 0]
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    terms.sort(key=_term_order, reverse=True)
    return Add(tuple(terms))


def mul(*args: Expr) -> Expr:
    """Canonical product of the arguments; products of sums are expanded."""
    coeff = Fraction(1)
    powers: dict = {}
    for a in args:
        if isinstance(a, Const):
            coeff *= a.value
            continue
        if isinstance(a, Mul):
            coeff *= a.coeff
            items = a.factors
        else:
            items = (a,)
        for f in items:
            base, e = _base_exp(f)
            powers[base] = powers.get(base, 0) + e
    if coeff == 0:
        return ZERO

    factors = []
    expand = []
    unwrapped = []
    for base, e in powers.items():
        if e == 0:
            continue
        if isinstance(base, Func) and base.name == "sqrt" and e.denominator == 1 and e % 2 == 0:
            unwrapped.append(power(base.arg, e / 2))
            continue
        if isinstance(base, Const):
            exact = _rational_power(base.value, e)
            if exact is not None:
                coeff *= exact
                continue
            whole = math.floor(e)
            coeff *= base.value**whole
            e -= whole
            factors.append(Pow(base, e))
        elif isinstance(base, Add) and e.denominator == 1 and e > 0:
            expand.append((base, int(e)))
        else:
            factors.append(base if e == 1 else Pow(base, e))
    if coeff == 0:
        return ZERO
    factors.sort()
    head = _build_term(coeff, tuple(factors))
    if unwrapped:
        return mul(head, *unwrapped, *(power(b, n) for b, n in expand))
    if not expand:
        return head
    terms = [head]
    for base, times in expand:
        for _ in range(times):
            terms = [mul(t, s) for t in terms for s in base.terms]
    return add(*terms)


def power(base: Expr, exp: Number) -> Expr:
    """Canonical ``base**exp`` for a rational exponent."""
    exp = Fraction(exp)
    if exp == 0:
        return ONE
    if exp == 1:
        return base
    if isinstance(base, Mul) and exp.denominator == 1:
        return mul(Const(base.coeff ** int(exp)), *(power(f, exp) for f in base.factors))
    if isinstance(base, Pow):
        # (b^p)^q == b^(pq) whenever q is an integer, or p is not (b >= 0 then)
        if exp.denominator == 1 or base.exp.denominator != 1:
            return power(base.base, base.exp * exp)
    if isinstance(base, Func) and base.name == "sqrt" and exp.denominator == 1 and exp % 2 == 0:
        return power(base.arg, exp / 2)
    if isinstance(base, Const) and base.value == 0 and exp < 0:
        raise ZeroDivisionError("zero raised to a negative power")
    return mul(Pow(base, exp))


def func(name: str, arg: Expr) -> Expr:
    """Canonical ``name(arg)``; folds only exact special values."""
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        v = arg.value
        if v == 0 and name in ("sin", "sqrt"):
            return ZERO
        if v == 0 and name in ("cos", "exp"):
            return ONE
        if v == 1 and name == "ln":
            return ZERO
        if name == "sqrt":
            exact = _rational_power(v, Fraction(1, 2))
            if exact is not None:
                return Const(exact)
    return Func(name, arg)


def rebuild(e: Expr, children: Iterable[Expr]) -> Expr:
    """Rebuild ``e`` with new children through the smart constructors."""
    children = tuple(children)
    if isinstance(e, Add):
        return add(*children)
    if isinstance(e, Mul):
        return mul(Const(e.coeff), *children)
    if isinstance(e, Pow):
        return power(children[0], e.exp)
    if isinstance(e, Func):
        return func(e.name, children[0])
    return e


def simplify(e: Expr) -> Expr:
    """Return the canonical form of ``e`` (idempotent)."""
    if isinstance(e, (Const, Symbol)):
        return e
    return rebuild(e, (simplify(c) for c in e.children()))


def substitute(e: Expr, mapping: Mapping[Expr, Expr]) -> Expr:
    """Replace symbols (or any exact subtrees) and re-canonicalize."""
    if not mapping:
        return e
    cache: dict = {}

    def walk(node):
        if node in mapping:
            return mapping[node]
        if isinstance(node, (Const, Symbol)):
            return node
        hit = cache.get(node)
        if hit is None:
            hit = rebuild(node, (walk(c) for c in node.children()))
            cache[node] = hit
        return hit

    return walk(e)


def depends_on(e: Expr, kinds: Iterable[Kind]) -> bool:
    kinds = set(kinds)
    return any(s.kind in kinds for s in e.free_symbols)


def symbols_of_kind(e: Expr, *kinds: Kind) -> list:
    return sorted(s for s in e.free_symbols if s.kind in kinds)
