"""Exact integrals of cubed generalized Laguerre polynomials.

Everything here is exact rational arithmetic.  The central object is

    Q_j(B) = (1/Gamma(B)) * integral_0^inf x^(B-1) e^(-x) L^3(j, B+j, x) dx,

which is a polynomial in B with positive coefficients.  Two independent
evaluation routes are implemented and cross-asserted:

  * moment route: expand L(j, B+j, x)^3 in x and use
    Gamma(B+k)/Gamma(B) = B(B+1)...(B+k-1),
  * sum route: the recurrence/orthogonality assembly
    Q_j(B) = (1/j!) T_0^2j(B) * sum_m (1/m!) S(j, j-m, j-m, B)

with the rising products T and alternating sums S defined below.  The Gamma
function is never materialized: all integrals reduce to the polynomial
moments T_0^(k-1)(B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import roots_genlaguerre


class IdentityViolation(AssertionError):
    """Two supposedly identical exact routes disagreed."""


class PoleError(ZeroDivisionError):
    """Evaluation at (or within 1e-9 of) a zero of a denominator product."""


# ---------------------------------------------------------------------------
# polynomials over Q

class RationalPoly:
    """Dense polynomial in one variable with Fraction coefficients."""

    __slots__ = ("c",)

    def __init__(self, coeffs=(0,)):
        c = [Fraction(x) for x in coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        self.c = c

    @classmethod
    def const(cls, x) -> "RationalPoly":
        return cls([Fraction(x)])

    @classmethod
    def variable(cls) -> "RationalPoly":
        return cls([0, 1])

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def __eq__(self, other):
        if isinstance(other, RationalPoly):
            return self.c == other.c
        return self.c == [Fraction(other)]

    def __hash__(self):
        return hash(tuple(self.c))

    def __add__(self, other):
        if not isinstance(other, RationalPoly):
            other = RationalPoly.const(other)
        n = max(len(self.c), len(other.c))
        out = [Fraction(0)] * n
        for i, x in enumerate(self.c):
            out[i] += x
        for i, x in enumerate(other.c):
            out[i] += x
        return RationalPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly([-x for x in self.c])

    def __sub__(self, other):
        if not isinstance(other, RationalPoly):
            other = RationalPoly.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return RationalPoly.const(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, RationalPoly):
            q = Fraction(other)
            return RationalPoly([x * q for x in self.c])
        out = [Fraction(0)] * (len(self.c) + len(other.c) - 1)
        for i, x in enumerate(self.c):
            if x == 0:
                continue
            for k, y in enumerate(other.c):
                out[i + k] += x * y
        return RationalPoly(out)

    __rmul__ = __mul__

    def shift(self, m) -> "RationalPoly":
        """Compose with B -> B + m."""
        m = Fraction(m)
        out = RationalPoly([0])
        for coef in reversed(self.c):   # Horner in (B + m)
            out = out * RationalPoly([m, 1]) + RationalPoly.const(coef)
        return out

    def __call__(self, x):
        if isinstance(x, Fraction) or isinstance(x, int):
            acc = Fraction(0)
        else:
            acc = 0.0
        for coef in reversed(self.c):
            acc = acc * x + (coef if isinstance(acc, Fraction) else float(coef))
        return acc

    def all_positive(self) -> bool:
        return all(x > 0 for x in self.c)

    def __repr__(self):
        return f"RationalPoly({self.c})"


def T_product(n1: int, n2: int) -> RationalPoly:
    """Rising product T_n1^n2(B) = prod_{n=n1}^{n2} (B + n); empty product is 1."""
    out = RationalPoly([1])
    for n in range(n1, n2 + 1):
        out = out * RationalPoly([n, 1])
    return out


def T_value(n1: int, n2: int, B) -> Fraction:
    out = Fraction(1)
    for n in range(n1, n2 + 1):
        out *= Fraction(B) + n
    return out


# ---------------------------------------------------------------------------
# generalized Laguerre polynomials

@dataclass(frozen=True)
class LagPoly:
    """L(j, alpha, x) with x-coefficients that are polynomials in B.

    ``alpha`` is B + shift for an integer shift (the cases needed here), or a
    plain rational when ``symbolic`` is False.
    """

    j: int
    coeffs: tuple   # x-coefficients, each a RationalPoly in B

    def eval_x(self, B, x):
        vals = [c(B) for c in self.coeffs]
        if isinstance(x, Fraction) or isinstance(x, int):
            acc = Fraction(0)
            for v in reversed(vals):
                acc = acc * Fraction(x) + v
            return acc
        acc = 0.0
        for v in reversed(vals):
            acc = acc * float(x) + float(v)
        return acc

    def xpoly_at(self, B) -> list:
        return [c(B) for c in self.coeffs]


def laguerre(j: int, alpha_shift: int | None = None, alpha_value=None) -> LagPoly:
    """L(j, alpha, x) = sum_i (-1)^i C(j+alpha, j-i) x^i / i!.

    Pass ``alpha_shift=s`` for the symbolic parameter alpha = B + s, or
    ``alpha_value`` for a concrete rational alpha.  The generalized binomial
    with upper argument j + alpha expands as a falling-factorial product of
    j - i linear factors over (j - i)!.
    """
    if j < 0:
        raise ValueError("degree must be nonnegative")
    coeffs = []
    for i in range(j + 1):
        # C(j + alpha, j - i) = prod_{t=i+1}^{j} (alpha + t) / (j - i)!
        if alpha_shift is not None:
            prod = T_product(alpha_shift + i + 1, alpha_shift + j)
        else:
            acc = Fraction(1)
            for t in range(i + 1, j + 1):
                acc *= Fraction(alpha_value) + t
            prod = RationalPoly.const(acc)
        coef = prod * Fraction((-1) ** i, math.factorial(j - i) * math.factorial(i))
        coeffs.append(coef)
    return LagPoly(j=j, coeffs=tuple(coeffs))


def _xpoly_mul(a: list, b: list) -> list:
    out = [RationalPoly([0])] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == RationalPoly([0]):
            continue
        for k, y in enumerate(b):
            out[i + k] = out[i + k] + x * y
    return out


def gamma_moments(xcoeffs: list) -> RationalPoly:
    """Integrate sum_k c_k(B) x^(B-1+k) e^(-x) over (0, inf), divided by Gamma(B).

    Each moment contributes T_0^(k-1)(B), so the result is a polynomial in B.
    """
    out = RationalPoly([0])
    for k, ck in enumerate(xcoeffs):
        out = out + ck * T_product(0, k - 1)
    return out


# ---------------------------------------------------------------------------
# alternating sums S and the two Q routes

def S_value(j: int, k1: int, k2: int, B) -> Fraction:
    """S(j,k1,k2,B) = sum_i (-1)^i C(j,i) C(j+k1-i,k1)^2 / T_(j-k2+i)^(j+i)(B)."""
    if not (0 <= k1 <= k2):
        raise ValueError("need 0 <= k1 <= k2")
    B = Fraction(B)
    total = Fraction(0)
    for i in range(j + 1):
        den = T_value(j - k2 + i, j + i, B)
        if den == 0:
            raise PoleError(f"S({j},{k1},{k2},B) has a pole at B={B}")
        total += Fraction((-1) ** i * math.comb(j, i) * math.comb(j + k1 - i, k1) ** 2, 1) / den
    return total


def S_value_float(j: int, k1: int, k2: int, B: float) -> float:
    for i in range(j + 1):
        for n in range(j - k2 + i, j + i + 1):
            if abs(B + n) < 1e-9:
                raise PoleError(f"S({j},{k1},{k2},B) within 1e-9 of pole at B={-n}")
    return float(S_value(j, k1, k2, Fraction(B).limit_denominator(10**15)))


def S_numerator(j: int, k1: int, k2: int) -> RationalPoly:
    """Polynomial S(j,k1,k2,B) * T_(j-k2)^(2j)(B), exact in B."""
    out = RationalPoly([0])
    for i in range(j + 1):
        # T_(j-k2)^(2j) / T_(j-k2+i)^(j+i) = T_(j-k2)^(j-k2+i-1) * T_(j+i+1)^(2j)
        quot = T_product(j - k2, j - k2 + i - 1) * T_product(j + i + 1, 2 * j)
        out = out + quot * Fraction((-1) ** i * math.comb(j, i) * math.comb(j + k1 - i, k1) ** 2)
    return out


def lag2_closed_form(j: int, k2: int) -> Fraction:
    """Closed form: S(j,0,k2,B) * T_(j-k2)^(2j)(B) = (j+k2)!/k2! (a constant)."""
    return Fraction(math.factorial(j + k2), math.factorial(k2))


def S_reduction_terms(j: int, k1: int, k2: int) -> list[tuple[Fraction, int, int, int]]:
    """One k1-reduction step: S(j,k1,k2,B) = sum of c * S(j', k1-1, k2, B + 2(j-j')).

    Returns (coefficient, j', k1-1, B-shift) triples, from the identity
    (j+k1-i)^2 = (j+k1)^2 - i(2j+2k1-1) + i(i-1).
    """
    if j < 2 or k1 < 1:
        raise ValueError("reduction step needs j >= 2 and k1 >= 1")
    kk = Fraction(1, k1 * k1)
    return [
        (Fraction((j + k1) ** 2) * kk, j, k1 - 1, 0),
        (Fraction((2 * j + 2 * k1 - 1) * j) * kk, j - 1, k1 - 1, 2),
        (Fraction(j * (j - 1)) * kk, j - 2, k1 - 1, 4),
    ]


def Q_via_moments(j: int) -> RationalPoly:
    """Cube L(j, B+j, x), integrate term-by-term against x^(B-1) e^(-x)."""
    L = laguerre(j, alpha_shift=j)
    sq = _xpoly_mul(list(L.coeffs), list(L.coeffs))
    cube = _xpoly_mul(sq, list(L.coeffs))
    return gamma_moments(cube)


def Q_via_sums(j: int) -> RationalPoly:
    """Assembly Q_j(B) = (1/j!) T_0^2j(B) sum_m S(j, j-m, j-m, B)/m!.

    Uses T_0^(2j)/T_m^(2j) = T_0^(m-1) to keep every term polynomial.
    """
    out = RationalPoly([0])
    for m in range(j + 1):
        numer = S_numerator(j, j - m, j - m)      # S * T_m^(2j)
        out = out + T_product(0, m - 1) * numer * Fraction(1, math.factorial(m))
    return out * Fraction(1, math.factorial(j))


@dataclass(frozen=True)
class QPolynomial:
    j: int
    poly: RationalPoly

    @property
    def positive_coefficients(self) -> bool:
        return self.poly.all_positive()

    def __call__(self, B):
        return self.poly(B)


def Q_symbolic(j: int) -> QPolynomial:
    """Q_j(B), computed by both exact routes and cross-asserted."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    via_m = Q_via_moments(j)
    via_s = Q_via_sums(j)
    if via_m != via_s:
        raise IdentityViolation(f"moment and sum routes disagree for Q_{j}")
    return QPolynomial(j=j, poly=via_m)


def Q_quadrature(j: int, B: float, n_nodes: int | None = None) -> tuple[float, float]:
    """Gauss-Laguerre evaluation of Q_j(B) with an error estimate.

    With weight x^(B-1) e^(-x) the integrand is the degree-3j polynomial
    L^3(j, B+j, x), integrated exactly by ceil((3j+1)/2) nodes; the estimate
    compares against a run with extra nodes.
    """
    if B <= 0:
        raise ValueError("B must be positive")
    B_frac = Fraction(B).limit_denominator(10**12)
    L = laguerre(j, alpha_value=B_frac + j)
    coeffs = [float(c(0)) for c in L.coeffs]   # constant polys for concrete alpha

    def poly_cubed(x):
        acc = np.zeros_like(x)
        for c in reversed(coeffs):
            acc = acc * x + c
        return acc**3

    def run(n):
        x, w = roots_genlaguerre(n, B - 1.0)
        return float(np.dot(w, poly_cubed(x))) / math.gamma(B)

    n0 = n_nodes or (math.ceil((3 * j + 1) / 2) + 2)
    v0 = run(n0)
    v1 = run(n0 + 8)
    err = abs(v1 - v0) + 1e-15 * abs(v1)
    return v1, err


# ---------------------------------------------------------------------------
# orthogonality and recurrence checks

def ortho_check(m: int, n: int, i: int, B) -> Fraction:
    """Gamma(B)-normalized integral of x^(B+i-1) e^(-x) L(m,.) L(n,.) with
    parameter B+i-1; equals T_0^(m+i-1)(B)/m! when m = n, else 0."""
    if m < 0 or n < 0:
        raise ValueError("indices must be nonnegative")
    Lm = laguerre(m, alpha_shift=i - 1)
    Ln = laguerre(n, alpha_shift=i - 1)
    prod = _xpoly_mul(list(Lm.coeffs), list(Ln.coeffs))
    # integral of x^(B+i-1+k) e^(-x) / Gamma(B) = T_0^(i+k-1)(B)
    out = RationalPoly([0])
    for k, ck in enumerate(prod):
        out = out + ck * T_product(0, i + k - 1)
    return out(Fraction(B))


def ortho_expected(m: int, n: int, i: int, B) -> Fraction:
    if m != n:
        return Fraction(0)
    return T_value(0, m + i - 1, Fraction(B)) / math.factorial(m)


def recurr_check(j: int, i: int) -> bool:
    """Symbolic identity L(j,B+j,x) = sum_m C(2j-i-m, j-m) L(m,B+i-1,x)."""
    if not (0 <= i <= j):
        raise ValueError("need 0 <= i <= j")
    lhs = laguerre(j, alpha_shift=j).coeffs
    rhs = [RationalPoly([0])] * (j + 1)
    for m in range(j + 1):
        Lm = laguerre(m, alpha_shift=i - 1)
        cmb = Fraction(math.comb(2 * j - i - m, j - m))
        for t, c in enumerate(Lm.coeffs):
            rhs[t] = rhs[t] + c * cmb
    if list(lhs) != rhs:
        raise IdentityViolation(f"Laguerre recurrence fails at j={j}, i={i}")
    return True
