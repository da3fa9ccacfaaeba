"""Exact arithmetic over GF(2)[x].

Polynomials are stored as integer bitsets: bit i is the coefficient of x^i,
so the octal string "7" is x^2 + x + 1 and "5" is x^2 + 1.  All operations
are pure and every value is immutable, so polynomials can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass

# Search cap for the complement order.  Degrees used in practice are <= 14,
# whose orders are <= 2^14 - 1, so this is generous.
ORDER_CAP = 1 << 20


class Gf2Error(ValueError):
    """Raised for invalid polynomial arguments (zero divisor, bad octal, ...)."""


@dataclass(frozen=True)
class Gf2Poly:
    """A binary polynomial; ``bits`` holds coefficients power-indexed."""

    bits: int

    def __post_init__(self):
        if self.bits < 0:
            raise Gf2Error("negative bitset")

    @property
    def degree(self) -> int | None:
        """Degree of the polynomial, or None for the zero polynomial."""
        if self.bits == 0:
            return None
        return self.bits.bit_length() - 1

    @property
    def is_zero(self) -> bool:
        return self.bits == 0

    def coeff(self, i: int) -> int:
        return (self.bits >> i) & 1

    @property
    def weight(self) -> int:
        return bin(self.bits).count("1")

    def eval_at_one(self) -> int:
        """Value of the polynomial at x = 1 (parity of the weight)."""
        return self.weight & 1

    def __mul__(self, other: "Gf2Poly") -> "Gf2Poly":
        return mul(self, other)

    def __xor__(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(self.bits ^ other.bits)

    def __divmod__(self, other: "Gf2Poly"):
        return gf2_divmod(self, other)

    def to_octal(self) -> str:
        return format(self.bits, "o")

    def __str__(self) -> str:
        if self.bits == 0:
            return "0"
        terms = []
        for i in range(self.bits.bit_length() - 1, -1, -1):
            if (self.bits >> i) & 1:
                terms.append("1" if i == 0 else ("x" if i == 1 else f"x^{i}"))
        return "+".join(terms)


ZERO = Gf2Poly(0)
ONE = Gf2Poly(1)
X = Gf2Poly(2)


def parse_octal(text: str) -> Gf2Poly:
    """Parse an octal digit string into a polynomial.

    Octal digit bits map directly onto ascending powers: "7" is 111b, i.e.
    x^2 + x + 1.
    """
    if not text:
        raise Gf2Error("empty octal string")
    if any(c not in "01234567" for c in text):
        raise Gf2Error(f"invalid octal polynomial: {text!r}")
    return Gf2Poly(int(text, 8))


def mul(p: Gf2Poly, q: Gf2Poly) -> Gf2Poly:
    """Carry-less product of two polynomials."""
    a, b = p.bits, q.bits
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return Gf2Poly(out)


def gf2_divmod(p: Gf2Poly, d: Gf2Poly) -> tuple[Gf2Poly, Gf2Poly]:
    """Long division: returns (quotient, remainder) with p = d*q + r."""
    if d.bits == 0:
        raise Gf2Error("division by the zero polynomial")
    dd = d.bits.bit_length() - 1
    r = p.bits
    q = 0
    while r.bit_length() - 1 >= dd and r:
        shift = (r.bit_length() - 1) - dd
        q |= 1 << shift
        r ^= d.bits << shift
    return Gf2Poly(q), Gf2Poly(r)


def min_complement(a: Gf2Poly) -> tuple[Gf2Poly, int]:
    """Smallest-order complement of ``a``: the (z, e) with a*z = x^e + 1.

    ``e`` is the least exponent >= 1 such that a divides x^e + 1; it exists
    exactly when ``a`` has a nonzero constant term.
    """
    if a.is_zero or a.coeff(0) != 1:
        raise Gf2Error("complement requires a nonzero constant term")
    if a.degree == 0:
        # a == 1 divides everything; the least exponent is 1.
        return Gf2Poly(0b11), 1
    # Track x^e mod a; a | x^e + 1 iff the residue reaches 1.
    da = a.degree
    r = 2  # x
    if da == 1:
        r ^= a.bits  # reduce once when deg a == 1
    e = 1
    while r != 1:
        r <<= 1
        if r.bit_length() - 1 == da:
            r ^= a.bits
        e += 1
        if e > ORDER_CAP:
            raise Gf2Error(f"complement order exceeds cap {ORDER_CAP}")
    xe1 = Gf2Poly((1 << e) | 1)
    z, rem = gf2_divmod(xe1, a)
    assert rem.is_zero
    return z, e


def is_primitive(a: Gf2Poly) -> bool:
    """True when the order of x modulo ``a`` is 2^deg(a) - 1."""
    if a.is_zero or a.degree is None or a.degree < 1 or a.coeff(0) != 1:
        return False
    try:
        _, order = min_complement(a)
    except Gf2Error:
        return False
    return order == (1 << a.degree) - 1


def reverse(p: Gf2Poly, width: int) -> Gf2Poly:
    """Mirror coefficients over [0, width]: bit i of the result is bit width-i of p."""
    if not p.is_zero and p.degree > width:
        raise Gf2Error(f"degree {p.degree} exceeds reversal width {width}")
    out = 0
    for i in range(width + 1):
        if p.coeff(width - i):
            out |= 1 << i
    return Gf2Poly(out)


def rate1_dual_polys(a_f: Gf2Poly, q_f: Gf2Poly):
    """Dual-encoder generator pairs for a rate-1 code a_f/q_f.

    Returns ((num_fwd, den), (num_bwd, den)) where den = x^(n+l) + 1, the
    forward numerator is q_f*z with z the minimum complement of a_f, and the
    backward numerator is built the same way from the coefficient-reversed
    pair (a_b, q_b).
    """
    for p in (a_f, q_f):
        if p.is_zero or p.coeff(0) != 1 or p.degree is None:
            raise Gf2Error("rate-1 polynomials must be nonzero with constant term 1")
    z_f, order = min_complement(a_f)
    den = Gf2Poly((1 << order) | 1)
    num_f = mul(q_f, z_f)
    n = max(a_f.degree, q_f.degree)
    a_b = reverse(a_f, n)
    q_b = reverse(q_f, n)
    z_b, order_b = min_complement(a_b)
    if order_b != order:
        raise Gf2Error("reversed polynomial changed the complement order")
    num_b = mul(q_b, z_b)
    return (num_f, den), (num_b, den)
