"""Problem parameters for the radial profile equation.

The equation under study is

    w'' + ((N-1)/r - r/2) w' - w/(p-1) + w^p = 0,   r > 0,

with spatial dimension N >= 1 and exponent p > 1.  Two distinguished
solutions exist in closed form: the constant kappa = (p-1)^(-1/(p-1)) and,
when p(N-2) > N, the singular profile L r^(-2/(p-1)) with
L^(p-1) = 2((N-2)p - N)/(p-1)^2.

Floating-point subtlety: both distinguished solutions are *unstable*
equilibria of the flow (perturbations grow like exp(r^2/4)), so the stored
coefficient floats for 1/(p-1) and L^(p-1) are defined as pow(kappa, p-1)
and pow(L, p-1).  Each is within an ulp or two of the rounded mathematical
constant, i.e. an equally valid double representation of the equation, and
it makes the discrete right-hand side vanish identically on the constant
solutions.  Without this no double-precision integrator could hold either
distinguished solution over a window like [0, 20]: a one-ulp residual gets
amplified by exp(r^2/4) ~ 1e43.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction


def _as_fraction(p) -> Fraction | None:
    """Exact rational view of the input exponent, when one exists."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, numbers.Integral):
        return Fraction(int(p))
    if isinstance(p, str):
        return Fraction(p)
    if isinstance(p, float):
        # prefer the small rational this float rounds from (3.95 -> 79/20),
        # falling back to the exact dyadic value
        q = Fraction(p).limit_denominator(10**12)
        return q if float(q) == p else Fraction(p)
    return None


@dataclass(frozen=True)
class ProblemParams:
    """Dimension N, exponent p, and derived equilibrium constants."""

    N: int
    p: float
    p_exact: Fraction | None
    one_over_pm1: float      # 1/(p-1) as pow(kappa, p-1): equilibrium-exact
    kappa: float             # constant solution
    L: float | None          # singular amplitude; None when p(N-2) <= N
    L_pm1: float | None      # L^(p-1) as pow(L, p-1): equilibrium-exact
    L_pm1_exact: Fraction | None

    @classmethod
    def make(cls, N, p) -> "ProblemParams":
        if not isinstance(N, numbers.Integral) or int(N) < 1:
            raise ValueError(f"N must be an integer >= 1, got {N!r}")
        p_exact = _as_fraction(p)
        p_f = float(p)
        if p_f <= 1.0:
            raise ValueError(f"p must exceed 1, got {p!r}")
        N = int(N)
        pm1 = p_f - 1.0
        kappa = math.pow(pm1, -1.0 / pm1)
        a = math.pow(kappa, pm1)        # 1/(p-1) up to an ulp; exact at kappa

        L = L_pm1 = L_pm1_exact = None
        if p_f * (N - 2) > N:
            if p_exact is not None:
                L_pm1_exact = 2 * ((N - 2) * p_exact - N) / (p_exact - 1) ** 2
                target = float(L_pm1_exact)
            else:
                target = 2.0 * ((N - 2) * p_f - N) / pm1**2
            L = math.pow(target, 1.0 / pm1)
            L_pm1 = math.pow(L, pm1)    # L^(p-1) up to an ulp; exact at L
        return cls(N=N, p=p_f, p_exact=p_exact, one_over_pm1=a, kappa=kappa,
                   L=L, L_pm1=L_pm1, L_pm1_exact=L_pm1_exact)

    @property
    def two_over_pm1(self) -> float:
        """Decay exponent 2/(p-1) of the singular profile."""
        return 2.0 / (self.p - 1.0)

    @property
    def supercritical(self) -> bool:
        """p above the Sobolev exponent (N+2)/(N-2)."""
        if self.N <= 2:
            return False
        if self.p_exact is not None:
            return self.p_exact > Fraction(self.N + 2, self.N - 2)
        return self.p > (self.N + 2) / (self.N - 2)

    def phi_inf(self, r):
        """Singular profile L r^(-2/(p-1)); requires p(N-2) > N."""
        if self.L is None:
            raise ValueError("singular profile undefined: p(N-2) <= N")
        return self.L * r ** (-self.two_over_pm1)

    def phi_inf_deriv(self, r):
        if self.L is None:
            raise ValueError("singular profile undefined: p(N-2) <= N")
        k = self.two_over_pm1
        return -k * self.L * r ** (-k - 1.0)

    def describe(self) -> dict:
        return {
            "N": self.N,
            "p": self.p if self.p_exact is None else self.p_exact,
            "kappa": self.kappa,
            "L": self.L,
            "L_pm1": self.L_pm1_exact if self.L_pm1_exact is not None else self.L_pm1,
            "supercritical": self.supercritical,
        }
