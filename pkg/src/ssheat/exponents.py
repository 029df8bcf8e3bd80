"""Critical exponents of the supercritical profile problem.

The Sobolev, Joseph-Lundgren, and Lepin exponents

    p_S  = (N+2)/(N-2)                          (N > 2, else infinite)
    p_JL = 1 + 4 (N-4+2 sqrt(N-1)) / ((N-2)(N-10))   (N > 10, else infinite)
    p_L  = 1 + 6/(N-10)                         (N > 10, else infinite)

separate the uniqueness / countable-multiplicity / finite-multiplicity /
nonexistence regimes for positive radial profiles.  p_S, p_L and the family
p_j below are rational in N and are kept exact; p_JL carries a single square
root and is kept as a quadratic surd so that comparisons against rationals
are still exact.

p_j(N) = 1 + (4j-2)/(N(j-1) - 2j^2 - 2j + 2) is the exponent at which the
j-th eigenvalue of the linearization at the singular profile vanishes;
p_2 coincides with p_L, and p_j > p_JL exactly when N > (2j-1)^2 + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .params import ProblemParams


@dataclass(frozen=True)
class QuadraticSurd:
    """Exact value a + b*sqrt(d) with rational a, b >= 0 and integer d >= 0."""

    a: Fraction
    b: Fraction
    d: int

    def __post_init__(self):
        if self.b < 0 or self.d < 0:
            raise ValueError("normalized surd requires b >= 0, d >= 0")

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def compare(self, q: Fraction) -> int:
        """Exact sign of (a + b*sqrt(d)) - q."""
        t = q - self.a
        if t < 0:
            return 1
        # both b*sqrt(d) and t nonnegative: compare squares
        lhs = self.b * self.b * self.d
        rhs = t * t
        return (lhs > rhs) - (lhs < rhs)

    def __lt__(self, q: Fraction) -> bool:
        return self.compare(q) < 0

    def __gt__(self, q: Fraction) -> bool:
        return self.compare(q) > 0


@dataclass(frozen=True)
class CriticalExponent:
    """A critical exponent: finite (with exact form when available) or infinite."""

    finite: bool
    approx: float | None = None
    exact: Fraction | None = None
    surd: QuadraticSurd | None = None

    @classmethod
    def infinite(cls) -> "CriticalExponent":
        return cls(finite=False)

    @classmethod
    def rational(cls, q: Fraction) -> "CriticalExponent":
        return cls(finite=True, approx=float(q), exact=q)

    @classmethod
    def from_surd(cls, s: QuadraticSurd) -> "CriticalExponent":
        root = math.isqrt(s.d)
        if root * root == s.d:   # surd degenerates to a rational
            return cls.rational(s.a + s.b * root)
        return cls(finite=True, approx=float(s), surd=s)

    def as_float(self) -> float:
        return self.approx if self.finite else math.inf

    def serialize(self):
        if not self.finite:
            return "inf"
        if self.exact is not None:
            return self.exact
        return self.approx


@dataclass(frozen=True)
class ExponentSet:
    """All closed-form constants of a given (N, p)."""

    p_S: CriticalExponent
    p_JL: CriticalExponent
    p_L: CriticalExponent
    kappa: float
    L: float | None
    L_pm1: Fraction | float | None

    def as_dict(self) -> dict:
        return {
            "p_S": self.p_S.serialize(),
            "p_JL": self.p_JL.serialize(),
            "p_L": self.p_L.serialize(),
            "kappa": self.kappa,
            "L": self.L,
            "L_pm1": self.L_pm1,
        }


def sobolev_exponent(N: int) -> CriticalExponent:
    if N <= 2:
        return CriticalExponent.infinite()
    return CriticalExponent.rational(Fraction(N + 2, N - 2))


def joseph_lundgren_exponent(N: int) -> CriticalExponent:
    if N <= 10:
        return CriticalExponent.infinite()
    den = (N - 2) * (N - 10)
    surd = QuadraticSurd(a=1 + Fraction(4 * (N - 4), den), b=Fraction(8, den), d=N - 1)
    return CriticalExponent.from_surd(surd)


def lepin_exponent(N: int) -> CriticalExponent:
    if N <= 10:
        return CriticalExponent.infinite()
    return CriticalExponent.rational(1 + Fraction(6, N - 10))


def compute_exponents(params: ProblemParams) -> ExponentSet:
    """Closed-form exponents and constants for the given parameters."""
    N = params.N
    L_pm1 = params.L_pm1_exact if params.L_pm1_exact is not None else params.L_pm1
    return ExponentSet(
        p_S=sobolev_exponent(N),
        p_JL=joseph_lundgren_exponent(N),
        p_L=lepin_exponent(N),
        kappa=params.kappa,
        L=params.L,
        L_pm1=L_pm1,
    )


@dataclass(frozen=True)
class PjResult:
    """Zero-eigenvalue exponent p_j, or the reason it does not exist."""

    j: int
    N: int
    value: Fraction | None
    above_joseph_lundgren: bool | None   # exact comparison outcome, when defined

    @property
    def defined(self) -> bool:
        return self.value is not None


def compute_pj(N: int, j: int) -> PjResult:
    """Exponent at which the j-th linearized eigenvalue vanishes (j >= 2).

    Returns an undefined result when the denominator N(j-1) - 2j^2 - 2j + 2
    is not positive; flags whether p_j lies above the Joseph-Lundgren
    exponent (equivalent to N > (2j-1)^2 + 1).
    """
    if j < 2:
        raise ValueError(f"j must be >= 2, got {j}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    den = N * (j - 1) - 2 * j * j - 2 * j + 2
    if den <= 0:
        return PjResult(j=j, N=N, value=None, above_joseph_lundgren=None)
    pj = 1 + Fraction(4 * j - 2, den)
    pjl = joseph_lundgren_exponent(N)
    if not pjl.finite:
        above = False
    elif pjl.exact is not None:
        above = pj > pjl.exact
    else:
        above = pjl.surd.compare(pj) < 0
    return PjResult(j=j, N=N, value=pj, above_joseph_lundgren=above)
