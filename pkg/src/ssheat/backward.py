"""Shooting from infinity.

In the variables y(rho) = w(1/rho) (1/rho)^(2/(p-1)), rho = 1/r, the profile
equation becomes

    y'' + (gamma/rho) y' + y'/(2 rho^3) + (y^p - L^(p-1) y)/rho^2 = 0,
    gamma = 3 - N + 4/(p-1),

with "initial" data y(0) = ell, y'(0) = 0 encoding the far-field amplitude.
The rho^-3 coefficient makes direct integration from rho = 0 impossible, so
the solution is produced on [0, delta] as the fixed point of the integral map

    y~(rho) = ell + int_0^rho z,
    z~(rho) = -2 rho g1(rho) + (2(gamma+1)/H) int_0^rho H g1
              + (2/H) int_0^rho eta H (p y^(p-1) - L^(p-1)) z,

with g1 = y^p - L^(p-1) y and the weight H(rho) = rho^gamma exp(-1/(4 rho^2)),
H(0) = 0.  The map is a contraction for small delta; delta is halved on any
failure of the observed contraction ratio, of the invariant ball, or of the
monotonicity of H.

The weighted integrals have an exp(-1/(4 eta^2)) boundary layer at eta = rho
that no fixed grid resolves, so each one is evaluated through the
substitution tau = 1/(4 eta^2) - 1/(4 rho^2), which turns it into a smooth
Gauss-Laguerre integral; the quadrature nodes are tied back to the uniform
rho grid by cubic interpolation, and the whole row operation is precomputed
as a sparse matrix reused across iterations (and cached across calls).

Past rho = delta the trajectory is handed off to radius integration of the
rescaled v-equation (v = w r^(2/(p-1)), the same object as y at rho = 1/r),
which keeps the singular profile v = L exactly and avoids the Gaussian-type
instability of the w chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.sparse import csr_matrix
from scipy.special import roots_laguerre

from . import ode
from .params import ProblemParams


class ContractionError(RuntimeError):
    """The fixed-point stage failed to contract down to the delta floor."""


def transform_gamma(params: ProblemParams) -> float:
    """Constant gamma = 3 - N + 4/(p-1) of the inverse-radius chart."""
    return 3.0 - params.N + 4.0 / (params.p - 1.0)


def weight_H(rho, gamma: float):
    """H(rho) = rho^gamma exp(-rho^-2/4), extended by H(0) = 0."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    pos = rho > 0
    with np.errstate(divide="ignore"):
        out[pos] = rho[pos] ** gamma * np.exp(-1.0 / (4.0 * rho[pos] ** 2))
    return float(out) if out.ndim == 0 else out


@dataclass
class PicardConfig:
    delta: float = 0.05
    epsilon_ball: float | None = None   # defaults to 0.45 * ell
    max_iters: int = 80
    stage_tol: float = 1e-13
    n_grid: int = 1024                  # uniform intervals on [0, delta]
    n_quad: int = 32                    # Gauss-Laguerre nodes per row
    delta_floor: float = 1e-3

    def __post_init__(self):
        if self.delta <= 0 or self.stage_tol <= 0:
            raise ValueError("delta and stage_tol must be positive")


@lru_cache(maxsize=32)
def _picard_kernel(gamma: float, delta: float, n_grid: int, n_quad: int):
    """Sparse row operators for the two weighted integrals.

    M1[i] . g  ~  int_0^rho_i H(eta) g(eta) d eta / H(rho_i)
    M2[i] . g  ~  int_0^rho_i eta H(eta) g(eta) d eta / H(rho_i)

    Substituting tau = eta^-2/4 - rho^-2/4 gives
    int = int_0^inf exp(-tau) (eta/rho)^gamma 2 eta^3 [eta] g(eta) d tau
    with eta(tau) = 1/(2 sqrt(tau + rho^-2/4)); g is pulled off the uniform
    grid by 4-point Lagrange interpolation.
    """
    h = delta / n_grid
    rho = np.linspace(0.0, delta, n_grid + 1)
    tau, wq = roots_laguerre(n_quad)

    rows, cols, d1, d2 = [], [], [], []
    for i in range(1, n_grid + 1):
        ci = 1.0 / (4.0 * rho[i] ** 2)
        eta = 0.5 / np.sqrt(tau + ci)
        ratio_pow = np.exp(gamma * (np.log(eta) - math.log(rho[i])))
        base1 = wq * ratio_pow * 2.0 * eta**3
        base2 = base1 * eta
        s = eta / h
        i0 = np.clip(np.floor(s).astype(int) - 1, 0, n_grid - 3)
        t = s - i0
        # Lagrange weights on the 4-point stencil i0..i0+3
        l0 = -(t - 1) * (t - 2) * (t - 3) / 6.0
        l1 = t * (t - 2) * (t - 3) / 2.0
        l2 = -t * (t - 1) * (t - 3) / 2.0
        l3 = t * (t - 1) * (t - 2) / 6.0
        for k in range(n_quad):
            for off, lw in enumerate((l0[k], l1[k], l2[k], l3[k])):
                rows.append(i)
                cols.append(i0[k] + off)
                d1.append(base1[k] * lw)
                d2.append(base2[k] * lw)
    shape = (n_grid + 1, n_grid + 1)
    M1 = csr_matrix((d1, (rows, cols)), shape=shape)
    M2 = csr_matrix((d2, (rows, cols)), shape=shape)
    return rho, M1, M2


@dataclass
class PicardResult:
    ell: float
    delta: float
    rho: np.ndarray
    y: np.ndarray
    z: np.ndarray
    iterations: int
    distances: list
    defect: float                  # final fixed-point defect (integral-form residual)
    ratios: list = field(default_factory=list)

    @property
    def endpoint(self) -> tuple[float, float]:
        return float(self.y[-1]), float(self.z[-1])

    def interpolants(self):
        return CubicSpline(self.rho, self.y), CubicSpline(self.rho, self.z)


def _picard_stage_once(params: ProblemParams, ell: float, delta: float,
                       cfg: PicardConfig):
    p, pm1, Lpm1 = params.p, params.p - 1.0, params.L_pm1
    gamma = transform_gamma(params)
    rho, M1, M2 = _picard_kernel(gamma, delta, cfg.n_grid, cfg.n_quad)
    eps_ball = cfg.epsilon_ball if cfg.epsilon_ball is not None else 0.45 * ell
    if not 0 < eps_ball < ell / 2:
        eps_ball = 0.45 * ell

    y = np.full_like(rho, ell)
    z = np.zeros_like(rho)
    distances, ratios = [], []
    floor = 32 * np.finfo(float).eps * max(1.0, abs(ell))
    for it in range(cfg.max_iters):
        yp = np.abs(y) ** pm1
        g1 = y * (yp - Lpm1)
        g2 = (p * yp - Lpm1) * z
        z_new = -2.0 * rho * g1 + 2.0 * (gamma + 1.0) * (M1 @ g1) + 2.0 * (M2 @ g2)
        y_new = ell + cumulative_simpson(z_new, dx=delta / cfg.n_grid, initial=0.0)
        d = float(np.max(np.abs(y_new - y)) + np.max(np.abs(z_new - z)))
        distances.append(d)
        y, z = y_new, z_new
        if np.max(np.abs(y - ell)) > eps_ball:
            return None, "left the invariant ball", distances, ratios
        if len(distances) >= 2 and distances[-2] > 100 * floor:
            ratio = distances[-1] / distances[-2]
            ratios.append(ratio)
            if ratio > 0.9:
                return None, f"contraction ratio {ratio:.3f} > 0.9", distances, ratios
        if d < cfg.stage_tol * max(1.0, abs(ell)) or d < floor:
            return PicardResult(ell=ell, delta=delta, rho=rho, y=y, z=z,
                                iterations=it + 1, distances=distances,
                                defect=d, ratios=ratios), "", distances, ratios
    return None, "no convergence within max_iters", distances, ratios


def picard_start(params: ProblemParams, ell: float,
                 cfg: PicardConfig | None = None) -> PicardResult:
    """Converged fixed-point stage on [0, delta], halving delta as needed."""
    if ell <= 0:
        raise ValueError("ell must be positive")
    if params.L_pm1 is None:
        raise ValueError("backward shooting requires p(N-2) > N")
    cfg = cfg or PicardConfig()
    gamma = transform_gamma(params)
    delta = cfg.delta
    if gamma < 0:   # keep H monotone increasing on (0, delta)
        delta = min(delta, 0.9 / math.sqrt(2.0 * abs(gamma)))
    failures = []
    while delta >= cfg.delta_floor:
        result, why, *_ = _picard_stage_once(params, ell, delta, cfg)
        if result is not None:
            return result
        failures.append((delta, why))
        delta *= 0.5
    raise ContractionError(f"fixed-point stage failed down to delta floor: {failures}")


@dataclass
class BackwardShot:
    ell: float
    gamma: float
    params: ProblemParams
    picard: PicardResult
    trajectory: ode.Trajectory          # v-state over [r_min, r_hand], integrated inward
    r_hand: float
    positive: bool
    crossing_r: float | None = None

    @property
    def y_start(self) -> tuple[float, float]:
        return self.picard.endpoint

    def v_state(self, r):
        """(v, v') at radius r (v = w r^(2/(p-1))), any r >= r_min."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        v = np.empty_like(r_arr)
        vr = np.empty_like(r_arr)
        inner = r_arr <= self.r_hand
        if np.any(inner):
            vals = self.trajectory(r_arr[inner])
            v[inner], vr[inner] = vals[0], vals[1]
        if np.any(~inner):
            ys, zs = self.picard.interpolants()
            rho = 1.0 / r_arr[~inner]
            v[~inner] = ys(rho)
            vr[~inner] = -zs(rho) * rho**2    # dv/dr = -y'(rho) rho^2
        if np.isscalar(r) or np.asarray(r).ndim == 0:
            return float(v[0]), float(vr[0])
        return v, vr

    def w_state(self, r):
        """(w, w') at radius r."""
        v, vr = self.v_state(r)
        k = self.params.two_over_pm1
        r_arr = np.asarray(r, dtype=float)
        scale = r_arr**-k
        return v * scale, (vr - k * v / r_arr) * scale

    def w_values(self, r):
        return self.w_state(r)[0]


def shoot_from_infinity(params: ProblemParams, ell: float, r_min: float,
                        picard_cfg: PicardConfig | None = None,
                        cfg: ode.IntegratorConfig | None = None) -> BackwardShot:
    """Fixed-point start at infinity, then inward integration to r_min."""
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    pic = picard_start(params, ell, picard_cfg)
    r_hand = 1.0 / pic.delta
    if r_min >= r_hand:
        raise ValueError(f"r_min = {r_min} must lie below the hand-off radius {r_hand}")
    y_d, z_d = pic.endpoint
    v0 = (y_d, -z_d * pic.delta**2)
    cfg = cfg or ode.IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    rhs = ode.make_v_rhs(params)
    cap = max(1e6, 1e3 * max(ell, params.L or 1.0) ** params.p)
    events = (ode.sign_change_event(), ode.blowup_event(cap))
    traj = ode.integrate(rhs, (r_hand, r_min), v0, cfg, events)
    crossing = traj.first_event("sign_change")
    return BackwardShot(ell=ell, gamma=transform_gamma(params), params=params,
                        picard=pic, trajectory=traj, r_hand=r_hand,
                        positive=crossing is None and traj.ok,
                        crossing_r=float(crossing) if crossing is not None else None)


@dataclass
class SensitivityTrace:
    """d/d ell of the backward solution, by centered differences."""

    ell: float
    step: float
    r: np.ndarray
    u_ell: np.ndarray
    u_ell_r: np.ndarray
    y_ell_at_zero: float       # normalization: should be 1 by construction
    y_ell: np.ndarray          # on the fixed-point grid
    rho: np.ndarray

    def at(self, r0: float) -> tuple[float, float]:
        i = int(np.argmin(np.abs(self.r - r0)))
        return float(self.u_ell[i]), float(self.u_ell_r[i])


def pick_sensitivity_step(params: ProblemParams, ell: float, r_probe: float,
                          picard_cfg: PicardConfig | None = None,
                          target_shift: float = 1e-4) -> float:
    """Step for finite differences in ell.

    Above the Joseph-Lundgren exponent du/d ell at moderate radii can reach
    1e6 and beyond, so a fixed relative step leaves the linear regime; the
    step is scaled from a cheap pilot difference to move the probe value by
    about ``target_shift`` relatively.
    """
    h0 = 1e-7 * ell
    lo = shoot_from_infinity(params, ell - h0, r_probe * 0.9, picard_cfg)
    hi = shoot_from_infinity(params, ell + h0, r_probe * 0.9, picard_cfg)
    du = abs(hi.w_values(r_probe) - lo.w_values(r_probe)) / (2 * h0)
    w_scale = max(abs(hi.w_values(r_probe)), 1e-12)
    if du == 0:
        return 1e-5 * ell
    h = target_shift * w_scale / du
    return float(min(max(h, 64 * np.finfo(float).eps * ell), 1e-5 * ell))


def sensitivity_u_ell(params: ProblemParams, ell: float, r_min: float,
                      h: float | None = None,
                      picard_cfg: PicardConfig | None = None,
                      cfg: ode.IntegratorConfig | None = None,
                      n_samples: int = 400) -> SensitivityTrace:
    """Centered-difference trace of u_ell on a log grid of radii.

    The normalization r^(2/(p-1)) u_ell -> 1 at infinity holds by
    construction: y(0) = ell exactly in the fixed-point stage, so the
    difference quotient of y at rho = 0 is exactly 1.
    """
    if h is None:
        h = pick_sensitivity_step(params, ell, max(1.0, 2 * r_min), picard_cfg)
    cfg = cfg or ode.IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15)
    lo = shoot_from_infinity(params, ell - h, r_min, picard_cfg, cfg)
    hi = shoot_from_infinity(params, ell + h, r_min, picard_cfg, cfg)
    r_hand = min(lo.r_hand, hi.r_hand)
    rr = np.geomspace(r_min, r_hand, n_samples)
    wlo, wlo_r = lo.w_state(rr)
    whi, whi_r = hi.w_state(rr)
    u_ell = (whi - wlo) / (2 * h)
    u_ell_r = (whi_r - wlo_r) / (2 * h)
    y_ell = (hi.picard.y - lo.picard.y) / (2 * h) if len(hi.picard.y) == len(lo.picard.y) else np.array([])
    rho = hi.picard.rho if len(hi.picard.y) == len(lo.picard.y) else np.array([])
    y0 = float(y_ell[0]) if len(y_ell) else 1.0
    return SensitivityTrace(ell=ell, step=h, r=rr, u_ell=u_ell, u_ell_r=u_ell_r,
                            y_ell_at_zero=y0, y_ell=y_ell, rho=rho)
