"""Spectrum of the linearization at the singular profile.

For p above the Joseph-Lundgren exponent, the weighted eigenvalue problem

    psi'' + ((N-1)/r - r/2) psi' + (-1/(p-1) + p L^(p-1)/r^2 + lambda) psi = 0,
    psi in H^1 with weight r^(N-1) exp(-r^2/4),

has the explicit eigenvalues lambda_j = beta/2 + 1/(p-1) + j, with beta the
larger root of theta^2 + (N-2) theta + p L^(p-1) = 0.  The eigenfunction of
lambda_j is r^beta M(-j, beta + N/2, r^2/4) with Kummer's confluent
hypergeometric function M, i.e. a generalized Laguerre polynomial in r^2/4.

Everything downstream of the discriminant (N-2)^2 - 4 p L^(p-1) is evaluated
exactly in rational arithmetic whenever p is rational and the discriminant is
a perfect rational square; the zero-eigenvalue bookkeeping (lambda_j = 0
exactly at p = p_j) relies on this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from . import ode
from ._util import log_slope
from .params import ProblemParams


class ComplexExponentError(ValueError):
    """Requested spectral data below the Joseph-Lundgren exponent."""


def _exact_sqrt(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class SpectrumInfo:
    beta: float
    beta_minus: float
    lambdas: tuple[float, ...]
    zero_eig: int | None
    discriminant: float
    exact: bool
    beta_exact: Fraction | None = None
    beta_minus_exact: Fraction | None = None
    lambdas_exact: tuple[Fraction, ...] | None = None
    discriminant_exact: Fraction | None = None

    def as_dict(self) -> dict:
        return {
            "beta": self.beta_exact if self.beta_exact is not None else self.beta,
            "beta_minus": self.beta_minus_exact if self.beta_minus_exact is not None else self.beta_minus,
            "lambda": list(self.lambdas_exact) if self.lambdas_exact is not None else list(self.lambdas),
            "zero_eigenvalue_index": self.zero_eig,
            "discriminant": self.discriminant_exact if self.discriminant_exact is not None else self.discriminant,
            "exact": self.exact,
        }


def discriminant(params: ProblemParams) -> tuple[float, Fraction | None]:
    """(N-2)^2 - 4 p L^(p-1), exact when p is rational."""
    if params.L_pm1 is None:
        raise ComplexExponentError("p(N-2) <= N: no singular profile, no spectrum")
    N = params.N
    exact = None
    if params.p_exact is not None and params.L_pm1_exact is not None:
        exact = Fraction((N - 2) ** 2) - 4 * params.p_exact * params.L_pm1_exact
        return float(exact), exact
    return (N - 2) ** 2 - 4.0 * params.p * params.L_pm1, None


def compute_spectrum(params: ProblemParams, j_max: int = 8) -> SpectrumInfo:
    """Frobenius exponents and the eigenvalue ladder lambda_0..lambda_j_max."""
    D, D_exact = discriminant(params)
    if D <= 0:
        raise ComplexExponentError(
            f"discriminant {D:.6g} <= 0 (p <= p_JL): Frobenius exponents not real")
    N = params.N

    root_exact = _exact_sqrt(D_exact) if D_exact is not None else None
    if root_exact is not None:
        beta_e = (-(N - 2) + root_exact) / 2
        betam_e = (-(N - 2) - root_exact) / 2
        lam0_e = beta_e / 2 + 1 / (params.p_exact - 1)
        lambdas_e = tuple(lam0_e + j for j in range(j_max + 1))
        zero = None
        jstar = -lam0_e
        if jstar.denominator == 1 and 0 <= jstar.numerator:
            zero = int(jstar)
        return SpectrumInfo(
            beta=float(beta_e), beta_minus=float(betam_e),
            lambdas=tuple(float(x) for x in lambdas_e),
            zero_eig=zero, discriminant=D, exact=True,
            beta_exact=beta_e, beta_minus_exact=betam_e,
            lambdas_exact=lambdas_e, discriminant_exact=D_exact)

    root = math.sqrt(D)
    beta = (-(N - 2) + root) / 2.0
    beta_m = (-(N - 2) - root) / 2.0
    lam0 = beta / 2.0 + params.one_over_pm1
    lambdas = tuple(lam0 + j for j in range(j_max + 1))
    zero = None
    jstar = -lam0
    if abs(jstar - round(jstar)) < 1e-12 * max(1.0, abs(jstar)) and round(jstar) >= 0:
        zero = int(round(jstar))
    return SpectrumInfo(beta=beta, beta_minus=beta_m, lambdas=lambdas,
                        zero_eig=zero, discriminant=D, exact=False,
                        discriminant_exact=D_exact)


# ---------------------------------------------------------------------------
# Kummer's function

def kummer_M(a, b, z, tol: float = 1e-16, max_terms: int = 400):
    """Confluent hypergeometric M(a, b, z) = sum (a)_k / (b)_k z^k / k!.

    Exact Fraction result when all inputs are rational and a is a nonpositive
    integer (the series terminates); otherwise a float from the truncated
    series, stopping when the geometric tail bound drops below ``tol``
    relative to the accumulated sum.
    """
    def is_rat(x):
        return isinstance(x, (int, Fraction))

    if is_rat(b) and Fraction(b).denominator == 1 and Fraction(b) <= 0:
        raise ValueError(f"b = {b} is a nonpositive integer (pole)")
    if is_rat(a) and Fraction(a).denominator == 1 and Fraction(a) <= 0 and is_rat(b) and is_rat(z):
        j = -int(Fraction(a))
        term = Fraction(1)
        total = Fraction(1)
        af, bf, zf = Fraction(a), Fraction(b), Fraction(z)
        for k in range(j):
            term = term * (af + k) / (bf + k) * zf / (k + 1)
            total += term
        return total

    a, b, z = float(a), float(b), float(z)
    if abs(b - round(b)) < 1e-14 and round(b) <= 0:
        raise ValueError(f"b = {b} is (numerically) a nonpositive integer")
    term, total = 1.0, 1.0
    for k in range(max_terms):
        term *= (a + k) / (b + k) * z / (k + 1)
        total += term
        ratio = abs((a + k + 1) / (b + k + 1) * z / (k + 2)) if b + k + 1 != 0 else 1.0
        if ratio < 0.5 and abs(term) < tol * max(1.0, abs(total)):
            break
    return total


def kummer_terminating_coeffs(j: int, b) -> list:
    """Coefficients of M(-j, b, z) as a degree-j polynomial in z (exact)."""
    bf = Fraction(b) if isinstance(b, (int, Fraction)) else None
    coeffs = [Fraction(1) if bf is not None else 1.0]
    term = coeffs[0]
    for k in range(j):
        if bf is not None:
            term = term * Fraction(-(j - k), 1) / (bf + k) / (k + 1)
        else:
            term = term * (-(j - k)) / (float(b) + k) / (k + 1)
        coeffs.append(term)
    return coeffs


# ---------------------------------------------------------------------------
# eigenfunctions

@dataclass(frozen=True)
class EigenFn:
    """Eigenfunction r^beta M_j(r^2/4) with exact polynomial part."""

    j: int
    b: float
    beta: float
    lam: float
    m_coeffs: tuple          # z-polynomial coefficients of M(-j, b, z)
    params: ProblemParams

    def polynomial_part(self, r):
        z = np.asarray(r, dtype=float) ** 2 / 4.0
        acc = np.zeros_like(z)
        for c in reversed(self.m_coeffs):
            acc = acc * z + float(c)
        return acc

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = r**self.beta * self.polynomial_part(r)
        return float(out) if out.ndim == 0 else out

    def zero_count(self, r_max: float = 20.0, samples: int = 4000) -> int:
        r = np.linspace(1e-6, r_max, samples)
        g = self.polynomial_part(r)       # zeros of psi on (0,inf) = zeros of M_j
        s = np.sign(g)
        return int(np.sum(s[1:] * s[:-1] < 0))

    def ode_residual(self, r) -> np.ndarray:
        """Relative residual of the eigen-equation at lambda_j."""
        r = np.asarray(r, dtype=float)
        beta, N, p = self.beta, self.params.N, self.params.p
        a = self.params.one_over_pm1
        pL = p * self.params.L_pm1
        # G(r) = M_j(z), z = r^2/4; r-derivatives via dz/dr = r/2
        cz = [float(c) for c in self.m_coeffs]
        z = r**2 / 4.0
        G = np.zeros_like(r)
        Gp = np.zeros_like(r)
        Gpp = np.zeros_like(r)
        for k, c in enumerate(cz):
            G += c * z**k
            if k >= 1:
                Gp += c * k * z ** (k - 1) * (r / 2.0)
                Gpp += c * k * z ** (k - 1) / 2.0
            if k >= 2:
                Gpp += c * k * (k - 1) * z ** (k - 2) * (r / 2.0) ** 2
        psi = r**beta * G
        psi_r = r**beta * (beta * G / r + Gp)
        psi_rr = r**beta * (beta * (beta - 1) * G / r**2 + 2 * beta * Gp / r + Gpp)
        drift = (N - 1) / r - r / 2.0
        q = -a + pL / r**2 + self.lam
        res = psi_rr + drift * psi_r + q * psi
        scale = np.abs(psi_rr) + np.abs(drift * psi_r) + np.abs(q * psi)
        return res / np.maximum(scale, 1e-300)

    def large_r_exponent(self) -> float:
        """Algebraic decay/growth rate at infinity: -2/(p-1) + 2 lambda_j."""
        return -self.params.two_over_pm1 + 2.0 * self.lam


def eigenfunction(params: ProblemParams, j: int, j_max_for_spectrum: int | None = None) -> EigenFn:
    info = compute_spectrum(params, j_max=max(j, j_max_for_spectrum or 0))
    if info.lambdas_exact is not None and params.p_exact is not None:
        b = info.beta_exact + Fraction(params.N, 2)
        coeffs = kummer_terminating_coeffs(j, b)
        lam = info.lambdas_exact[j]
        return EigenFn(j=j, b=float(b), beta=float(info.beta_exact), lam=float(lam),
                       m_coeffs=tuple(coeffs), params=params)
    b = info.beta + params.N / 2.0
    coeffs = kummer_terminating_coeffs(j, b)
    return EigenFn(j=j, b=b, beta=info.beta, lam=info.lambdas[j],
                   m_coeffs=tuple(coeffs), params=params)


# ---------------------------------------------------------------------------
# the two fundamental zero-eigenvalue solutions

def _frobenius_series(params: ProblemParams, exponent: float, other: float,
                      r: float, lam: float = 0.0, terms: int = 40):
    """Series r^exponent * sum c_m r^(2m) for the lambda-shifted linearization.

    Recurrence: c_m = c_(m-1) (exponent/2 + 1/(p-1) + (m-1) + lam') /
    (2m (2m + exponent - other)); raises on a resonant denominator.
    """
    gap = exponent - other
    a = params.one_over_pm1
    c = 1.0
    S, Sp = 1.0, 0.0   # sum c_m r^(2m) and its r-derivative
    for m in range(1, terms):
        num = exponent / 2.0 + a + (m - 1) - lam
        den = 2.0 * m * (2.0 * m + gap)
        if abs(2.0 * m + gap) < 1e-9:
            raise ValueError(f"resonant Frobenius series: 2m = {-gap:.3g}")
        c = c * num / den
        S += c * r ** (2 * m)
        Sp += 2 * m * c * r ** (2 * m - 1)
        if abs(c * r ** (2 * m)) < 1e-18 * abs(S):
            break
    psi = r**exponent * S
    psi_r = r**exponent * (exponent * S / r + Sp)
    return psi, psi_r


@dataclass
class FundamentalPair:
    """psi_1 (exponent beta) and psi_2 (exponent beta-) of the zero-shift
    linearization, with the large-r diagnosis of psi_1."""

    psi1: ode.Trajectory
    psi2: ode.Trajectory
    beta: float
    beta_minus: float
    fitted_exponent: float | None
    target_exponent: float
    growth_factor: float
    zero_eig_detected: bool | None     # None = inconclusive
    fit_residuals: tuple[float, float]  # (decay model, growth model)
    wronskian_drift: float


def psi1_psi2_lambda0(params: ProblemParams, r_start: float = 0.5,
                      r_max: float = 9.5, cfg: ode.IntegratorConfig | None = None) -> FundamentalPair:
    """Integrate the two fundamental solutions of the zero-eigenvalue
    linearization from Frobenius series starts and classify whether psi_1
    decays like r^(-2/(p-1)) at infinity (the zero-eigenvalue criterion).

    The scaled quantity v = psi_1 r^(2/(p-1)) is fitted on the tail window
    against two candidate behaviors: a constant with 1/r^2 correction (decay
    at the target exponent) and Gaussian-type growth (no eigenvalue at zero).
    The window starts past the last zero of psi_1 and ends before the unstable
    mode swamps double precision.
    """
    info = compute_spectrum(params)
    cfg = cfg or ode.IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    rhs = ode.make_singular_linearized_rhs(params, lam=0.0)

    y1 = _frobenius_series(params, info.beta, info.beta_minus, r_start)
    psi1 = ode.integrate(rhs, (r_start, r_max), y1, cfg)
    y2_start = 0.2
    y2 = _frobenius_series(params, info.beta_minus, info.beta, y2_start)
    psi2 = ode.integrate(rhs, (y2_start, min(4.0, r_max)), y2, cfg)

    target = -params.two_over_pm1
    rr_all = np.geomspace(r_start, r_max, 800)
    vals = psi1(rr_all)[0]
    v_all = vals * rr_all ** (-target)   # flat iff decay at the target rate
    flips = rr_all[1:][np.sign(vals[1:]) * np.sign(vals[:-1]) < 0]
    tail_flips = flips[flips > 0.65 * r_max] if len(flips) else flips

    fitted_exponent = None
    detected = None
    growth = math.nan
    res_decay = res_growth = math.nan
    if len(tail_flips):
        # a sign change in the far field: a tail decaying at the target rate
        # is sign-definite there, so this is the Gaussian-type mode flipping
        flip = tail_flips[-1]
        before = np.max(np.abs(v_all[(rr_all > 0.6 * r_max) & (rr_all < flip)]))
        after = np.max(np.abs(v_all[rr_all > flip]))
        growth = after / max(before, 1e-300)
        if growth > 3.0:
            detected = False
            sel = rr_all > flip * 1.02
            if np.count_nonzero(sel) > 10:
                fitted_exponent = target + log_slope(rr_all[sel], v_all[sel])
    else:
        last_zero = flips[-1] if len(flips) else r_start
        lo = max(r_max / 2.0, 1.3 * last_zero)
        if lo < 0.85 * r_max:
            rr = np.geomspace(lo, r_max, 120)
            v = psi1(rr)[0] * rr ** (-target)
            growth = abs(v[-1]) / max(abs(v[len(v) // 2]), 1e-300)
            # decay model: v = A + B * (4/r^2)
            X = np.column_stack([np.ones_like(rr), 4.0 / rr**2])
            coef, *_ = np.linalg.lstsq(X, v, rcond=None)
            fit = X @ coef
            res_decay = float(np.sqrt(np.mean((v - fit) ** 2)) / max(abs(coef[0]), 1e-300))
            # growth model: log|v| linear in r^2/4
            Y = np.column_stack([np.ones_like(rr), rr**2 / 4.0])
            lcoef, *_ = np.linalg.lstsq(Y, np.log(np.abs(v) + 1e-300), rcond=None)
            lfit = Y @ lcoef
            res_growth = float(np.sqrt(np.mean((np.log(np.abs(v) + 1e-300) - lfit) ** 2)))
            if growth < 3.0 and res_decay < 0.05 and abs(coef[0]) > 0:
                detected = True
                # effective exponent with the fitted 1/r^2 trend removed
                fitted_exponent = target + log_slope(rr, v / fit)
            elif growth > 30.0 and lcoef[1] > 0.3:
                detected = False
                fitted_exponent = target + log_slope(rr[-40:], v[-40:])

    wlo, whi = max(r_start, y2_start), min(3.5, r_max / 2)
    rr_w = np.geomspace(wlo, whi, 80)
    w = ode.wronskian(psi1(rr_w)[0], psi1(rr_w)[1], psi2(rr_w)[0], psi2(rr_w)[1])
    ww = w * ode.omega(rr_w, params.N)
    drift = float(np.max(np.abs(ww - ww[0])) / abs(ww[0]))

    return FundamentalPair(psi1=psi1, psi2=psi2, beta=info.beta,
                           beta_minus=info.beta_minus,
                           fitted_exponent=fitted_exponent,
                           target_exponent=target, growth_factor=float(growth),
                           zero_eig_detected=detected,
                           fit_residuals=(res_decay, res_growth),
                           wronskian_drift=drift)


# ---------------------------------------------------------------------------
# limit of the second curve derivative at the singular matching point

def envelope_gamma(params: ProblemParams):
    """Small-radius envelope exponent N - 1 + 3 beta - 2(p-2)/(p-1).

    The limiting integrand of the second curve derivative behaves like
    s^envelope_gamma at s = 0; the integral diverges iff this is <= -1.
    Exact when the discriminant root is rational.  (Named envelope_gamma to
    avoid clashing with the transform constant gamma of the inverse-radius
    chart.)
    """
    info = compute_spectrum(params)
    if info.beta_exact is not None and params.p_exact is not None:
        pe = params.p_exact
        return params.N - 1 + 3 * info.beta_exact - 2 * (pe - 2) / (pe - 1)
    p = params.p
    return params.N - 1 + 3 * info.beta - 2.0 * (p - 2.0) / (p - 1.0)


@dataclass(frozen=True)
class F2Limit:
    divergent: bool
    envelope_exponent: float
    value: float | None
    r0: float


def f_double_prime_limit(params: ProblemParams, r0: float) -> F2Limit:
    """Limit of F'' at the singular matching value, or a divergence flag.

    When the envelope exponent is <= -1 the limit is -infinity; otherwise

        -p(p-1) L^(p-2) / omega(r0) *
            integral_0^r0 s^(N-1-2(p-2)/(p-1)) e^(-s^2/4) psi_inf(s)^3 ds,

    with psi_inf the bounded zero-shift solution normalized at r0.
    """
    info = compute_spectrum(params)
    g = envelope_gamma(params)
    gf = float(g)
    if gf <= -1.0:
        return F2Limit(divergent=True, envelope_exponent=gf, value=None, r0=r0)

    p, N = params.p, params.N
    expo = N - 1 - 2.0 * (p - 2.0) / (p - 1.0)

    if info.zero_eig is not None:
        fn = eigenfunction(params, info.zero_eig)

        def psi_of(s: float) -> float:
            return float(fn(s))
    else:
        r_s = 0.05
        rhs = ode.make_singular_linearized_rhs(params, lam=0.0)
        y = _frobenius_series(params, info.beta, info.beta_minus, r_s)
        traj = ode.integrate(rhs, (r_s, r0), y, ode.IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14))

        def psi_of(s: float) -> float:
            if s >= r_s:
                return float(traj(s)[0])
            return _frobenius_series(params, info.beta, info.beta_minus, s)[0]

    c0 = 1.0 / psi_of(r0)

    def integrand(s: float) -> float:
        val = c0 * psi_of(s)
        return s**expo * math.exp(-s * s / 4.0) * val**3

    s_cut = min(0.05, r0 / 10.0)
    # analytic near-zero prefix from the leading r^beta behavior
    lead = c0 * psi_of(s_cut) / s_cut ** float(info.beta)
    prefix = lead**3 * s_cut ** (gf + 1.0) / (gf + 1.0)
    body, _ = quad(integrand, s_cut, r0, limit=200, epsabs=1e-14, epsrel=1e-11)
    total = prefix + body
    value = -p * (p - 1.0) * params.L ** (p - 2.0) / ode.omega(r0, N) * total
    return F2Limit(divergent=False, envelope_exponent=gf, value=value, r0=r0)
