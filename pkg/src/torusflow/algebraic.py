"""Algebraic number literals evaluated lazily at configurable precision.

Configs and the CLI accept coordinate values like ``"sqrt(2)-1"`` or
``"(sqrt(5)-1)/2"``.  The grammar is

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | atom
    atom   := NUMBER | "sqrt" "(" expr ")" | "(" expr ")"
    NUMBER := digits ["." digits] [("e"|"E") ["+"|"-"] digits]

Numbers parse exactly (decimal strings become exact rationals), so a
literal denotes an exact mathematical value.  Rendering to a float, an
mpmath float, or a fixed-point integer happens on demand at any requested
binary precision; results are cached per precision so a value can be
reused at escalating precision without reparsing.
"""

from __future__ import annotations

import os
import re
from decimal import Decimal
from fractions import Fraction
from math import isqrt

import mpmath

from .errors import PrecisionExhaustedError, ValidationError

#: Working precision used when the caller does not specify one.  Roughly
#: 57 decimal digits; always at least double-double territory.
_FALLBACK_PRECISION_BITS = 192

#: Fixed-point scale used for orbit generation and ||n*alpha|| scans.
DEFAULT_FIXED_SCALE = 192


def default_precision_bits() -> int:
    """Working precision in bits, overridable via TORUSFLOW_PRECISION_BITS."""
    raw = os.environ.get("TORUSFLOW_PRECISION_BITS")
    if raw is None:
        return _FALLBACK_PRECISION_BITS
    try:
        bits = int(raw)
    except ValueError:
        raise ValidationError(f"TORUSFLOW_PRECISION_BITS is not an integer: {raw!r}")
    if bits < 64:
        raise ValidationError(f"TORUSFLOW_PRECISION_BITS too small: {bits} (need >= 64)")
    return bits


# ---------------------------------------------------------------------------
# expression tree
#
# Nodes are plain tuples:  ("num", Fraction) | ("sqrt", node)
#                        | ("add"|"sub"|"mul"|"div", left, right) | ("neg", node)
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[()+\-*/]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ValidationError(f"cannot tokenize literal at {text[pos:]!r}")
        pos = m.end()
        for kind in ("num", "name", "op"):
            if m.group(kind) is not None:
                tokens.append((kind, m.group(kind)))
                break
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value):
        kind, text = self.take()
        if text != value:
            raise ValidationError(f"expected {value!r}, got {text!r}")

    def parse(self):
        node = self.expr()
        if self.i != len(self.tokens):
            raise ValidationError(f"trailing input after literal: {self.tokens[self.i:]}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.factor()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def factor(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.factor())
        return self.atom()

    def atom(self):
        kind, text = self.take()
        if kind == "num":
            return ("num", Fraction(Decimal(text)))
        if kind == "name":
            if text != "sqrt":
                raise ValidationError(f"unknown function {text!r} in literal")
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return ("sqrt", inner)
        if text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ValidationError(f"unexpected token {text!r} in literal")


def _node_fraction(node) -> Fraction | None:
    """Exact rational value of a node, or None if (syntactically) irrational."""
    op = node[0]
    if op == "num":
        return node[1]
    if op == "neg":
        v = _node_fraction(node[1])
        return None if v is None else -v
    if op == "sqrt":
        v = _node_fraction(node[1])
        if v is None:
            return None
        if v < 0:
            raise ValidationError("sqrt of a negative value in literal")
        rn, rd = isqrt(v.numerator), isqrt(v.denominator)
        if rn * rn == v.numerator and rd * rd == v.denominator:
            return Fraction(rn, rd)
        return None
    lhs = _node_fraction(node[1])
    rhs = _node_fraction(node[2])
    if lhs is None or rhs is None:
        return None
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        if rhs == 0:
            raise ValidationError("division by zero in literal")
        return lhs / rhs
    raise AssertionError(op)


def _node_eval(node, prec_bits: int) -> mpmath.mpf:
    op = node[0]
    if op == "num":
        return mpmath.mpf(node[1].numerator) / node[1].denominator
    if op == "neg":
        return -_node_eval(node[1], prec_bits)
    if op == "sqrt":
        return mpmath.sqrt(_node_eval(node[1], prec_bits))
    lhs = _node_eval(node[1], prec_bits)
    rhs = _node_eval(node[2], prec_bits)
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        return lhs / rhs
    raise AssertionError(op)


def _node_repr(node) -> str:
    op = node[0]
    if op == "num":
        f = node[1]
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    if op == "neg":
        return f"-({_node_repr(node[1])})"
    if op == "sqrt":
        return f"sqrt({_node_repr(node[1])})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
    return f"({_node_repr(node[1])}{sym}{_node_repr(node[2])})"


class AlgebraicValue:
    """A lazily evaluated number built from rationals and square roots."""

    __slots__ = ("_node", "_frac", "_cache", "_text")

    def __init__(self, node, text: str | None = None):
        self._node = node
        self._frac = _node_fraction(node)
        self._cache: dict[int, mpmath.mpf] = {}
        self._text = text

    # -- constructors -------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "AlgebraicValue":
        node = _Parser(_tokenize(text)).parse()
        return cls(node, text=text)

    @classmethod
    def from_rational(cls, value) -> "AlgebraicValue":
        return cls(("num", Fraction(value)))

    @classmethod
    def coerce(cls, value) -> "AlgebraicValue":
        """Accept literals, ints, Fractions, floats (exact binary value)."""
        if isinstance(value, AlgebraicValue):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, (int, Fraction)):
            return cls.from_rational(value)
        if isinstance(value, float):
            return cls.from_rational(Fraction(value))
        raise ValidationError(f"cannot interpret {value!r} as a number")

    # -- queries ------------------------------------------------------

    @property
    def is_rational(self) -> bool:
        return self._frac is not None

    def as_fraction(self) -> Fraction | None:
        return self._frac

    def eval_mpf(self, prec_bits: int | None = None) -> mpmath.mpf:
        bits = prec_bits if prec_bits is not None else default_precision_bits()
        cached = self._cache.get(bits)
        if cached is not None:
            return cached
        with mpmath.workprec(bits + 16):
            raw = _node_eval(self._node, bits + 16)
        with mpmath.workprec(bits):
            value = +raw
        self._cache[bits] = value
        return value

    def fixed(self, scale_bits: int = DEFAULT_FIXED_SCALE) -> int:
        """Nearest integer to value * 2**scale_bits (error <= 1/2 + 2**-48).

        Rational values round exactly.  Irrational values are rendered with
        guard bits; the guard is escalated if the result sits too close to a
        rounding boundary to call.
        """
        if self._frac is not None:
            num = self._frac.numerator << scale_bits
            q, r = divmod(num, self._frac.denominator)
            return q + (1 if 2 * r >= self._frac.denominator else 0)
        guard = 64
        while guard <= 4096:
            with mpmath.workprec(scale_bits + guard):
                scaled = _node_eval(self._node, scale_bits + guard) * mpmath.mpf(2) ** scale_bits
                near = mpmath.nint(scaled)
                if abs(scaled - near) < mpmath.mpf(0.5) - mpmath.mpf(2) ** (-guard // 2):
                    return int(near)
            guard *= 2
        raise PrecisionExhaustedError(
            f"fixed-point rounding of {self!r} at scale {scale_bits} is ambiguous"
        )

    def __float__(self) -> float:
        return float(self.eval_mpf(96))

    # -- arithmetic (builds new trees) ---------------------------------

    def _combine(self, other, op):
        other = AlgebraicValue.coerce(other)
        return AlgebraicValue((op, self._node, other._node))

    def __add__(self, other):
        return self._combine(other, "add")

    def __sub__(self, other):
        return self._combine(other, "sub")

    def __mul__(self, other):
        return self._combine(other, "mul")

    def __truediv__(self, other):
        return self._combine(other, "div")

    def __neg__(self):
        return AlgebraicValue(("neg", self._node))

    def __radd__(self, other):
        return AlgebraicValue.coerce(other)._combine(self, "add")

    def __rsub__(self, other):
        return AlgebraicValue.coerce(other)._combine(self, "sub")

    def __rmul__(self, other):
        return AlgebraicValue.coerce(other)._combine(self, "mul")

    def sqrt(self) -> "AlgebraicValue":
        return AlgebraicValue(("sqrt", self._node))

    def literal(self) -> str:
        return self._text if self._text is not None else _node_repr(self._node)

    def __repr__(self) -> str:
        return f"AlgebraicValue({self.literal()!r})"


def parse_literal(text: str) -> AlgebraicValue:
    return AlgebraicValue.parse(text)


def sqrt_int(n: int) -> AlgebraicValue:
    return AlgebraicValue.from_rational(n).sqrt()


# ---------------------------------------------------------------------------
# fixed-point orbit helpers
#
# The k-th Kronecker point {s + k*alpha} is computed from exact integers
# r_k = (s_fix + k*alpha_fix) mod 2**scale, never by accumulating floats,
# so there is no error growth in k beyond the one-time rounding of alpha.
# ---------------------------------------------------------------------------


def frac_orbit_floats(step_fixed: int, scale_bits: int, count: int,
                      start_fixed: int = 0, k0: int = 0):
    """Float64 array of {start + k*step} for k = k0 .. k0+count-1."""
    import numpy as np

    mask = (1 << scale_bits) - 1
    inv = 2.0 ** -scale_bits
    r = (start_fixed + k0 * step_fixed) & mask
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        out[i] = r * inv
        r = (r + step_fixed) & mask
    return out


def frac_point(step_fixed: int, scale_bits: int, k: int, start_fixed: int = 0) -> float:
    mask = (1 << scale_bits) - 1
    return ((start_fixed + k * step_fixed) & mask) * 2.0 ** -scale_bits


def nearest_int_distance_fixed(r: int, scale_bits: int) -> int:
    """min(r, 2**scale - r) for a residue r in [0, 2**scale)."""
    half = 1 << (scale_bits - 1)
    return r if r <= half else (1 << scale_bits) - r
