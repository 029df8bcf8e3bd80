"""Shooting from the origin.

The initial-value problem w(0) = alpha, w'(0) = 0 has a regular singular
point at r = 0; integration starts from a Taylor expansion in even powers,

    w(r) = alpha + a2 r^2 + a4 r^4 + a6 r^6 + ...,
    a2 = (alpha/(p-1) - alpha^p) / (2N),

with the variational solution z = dw/dalpha started from the
alpha-derivative of the same series.

A trajectory is classified by what it does on the integration window:
crosses zero, blows up, or stays positive.  Positivity alone is not a
usable membership test in floating point, because every decaying profile is
shadowed by a Gaussian-type growing mode that amplifies one-ulp errors by
exp(r^2/4); even the exact shooting value would peel off the decaying tail
near r ~ 12.  Membership in the positive-profile set is therefore proxied by
"positive up to the tameness horizon AND captured by the far-field form
w ~ ell r^(-2/(p-1)) (1 - c r^-2 + d r^-4)", with the horizon detected from
the scaled trace v = w r^(2/(p-1)).  The fitted ell and c are the
asymptotic coefficients; c should agree with ell^(p-1) - L^(p-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .params import ProblemParams


@dataclass(frozen=True)
class SeriesCoefficients:
    a2: float
    a4: float
    a6: float
    b2: float = 0.0     # variational counterparts (d/dalpha of a2, a4, a6)
    b4: float = 0.0
    b6: float = 0.0


def series_coefficients(params: ProblemParams, alpha: float) -> SeriesCoefficients:
    N, p, a = params.N, params.p, params.one_over_pm1
    ap = math.pow(alpha, p - 1.0)
    a2 = alpha * (a - ap) / (2.0 * N)
    fac = 1.0 + a - p * ap
    a4 = a2 * fac / (4.0 * (N + 2))
    a6 = (a4 * (2.0 + a - p * ap) - 0.5 * p * (p - 1.0) * math.pow(alpha, p - 2.0) * a2 * a2) / (6.0 * (N + 4))
    b2 = (a - p * ap) / (2.0 * N)
    b4 = (b2 * fac - a2 * p * (p - 1.0) * math.pow(alpha, p - 2.0)) / (4.0 * (N + 2))
    ppm1 = p * (p - 1.0)
    b6 = (b4 * (2.0 + a - p * ap)
          - a4 * ppm1 * math.pow(alpha, p - 2.0)
          - 0.5 * ppm1 * (p - 2.0) * math.pow(alpha, p - 3.0) * a2 * a2
          - ppm1 * math.pow(alpha, p - 2.0) * a2 * b2) / (6.0 * (N + 4))
    return SeriesCoefficients(a2=a2, a4=a4, a6=a6, b2=b2, b4=b4, b6=b6)


def series_start(params: ProblemParams, alpha: float, r_eps: float = 1e-3,
                 abs_tol: float = 1e-13, variational: bool = False):
    """Taylor-expanded state at a small radius, with a truncation bound.

    Returns (r_eps, state, bound) where state is (w, w') or (w, w', z, z'),
    and r_eps is halved until the next-order term falls below ``abs_tol``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sc = series_coefficients(params, alpha)
    r = r_eps
    for _ in range(60):
        bound = abs(sc.a6) * r**6
        if variational:
            bound = max(bound, abs(sc.b6) * r**6)
        if bound <= abs_tol or r < 1e-8:
            break
        r *= 0.5
    r2 = r * r
    w = alpha + r2 * (sc.a2 + r2 * sc.a4)
    wr = r * (2.0 * sc.a2 + 4.0 * r2 * sc.a4)
    if not variational:
        return r, (w, wr), bound
    z = 1.0 + r2 * (sc.b2 + r2 * sc.b4)
    zr = r * (2.0 * sc.b2 + 4.0 * r2 * sc.b4)
    return r, (w, wr, z, zr), bound


@dataclass
class AsymptoticFit:
    ell: float
    c: float
    d: float
    window: tuple[float, float]
    rel_residual: float


@dataclass
class ForwardShot:
    alpha: float
    params: ProblemParams
    trajectory: ode.Trajectory
    classification: str                 # 'positive' | 'sign_change' | 'diverged'
    captured: bool
    is_constant: bool
    crossing_r: float | None = None
    fit: AsymptoticFit | None = None
    tame_end: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ell(self) -> float | None:
        return self.fit.ell if self.fit is not None else None

    @property
    def c_alpha(self) -> float | None:
        return self.fit.c if self.fit is not None else None

    @property
    def is_member_proxy(self) -> bool:
        """Positive up to the horizon and captured by the far-field form."""
        return self.is_constant or (self.classification == "positive" and self.captured)

    def state_at(self, r: float) -> np.ndarray:
        return self.trajectory(r)


@dataclass
class FitConfig:
    span: float = math.sqrt(10.0)      # fit window is [b/span, b]
    slope_cap: float = 0.6             # tameness bound on |d ln v / d ln r|
    residual_tol: float = 1e-3
    min_radius: float = 2.5            # capture requires the window to reach past this
    samples: int = 800


def fit_asymptotics(params: ProblemParams, traj: ode.Trajectory,
                    window: tuple[float, float], n: int = 240,
                    terms: int = 4) -> AsymptoticFit:
    """Least squares of v = w r^(2/(p-1)) against ell (1 - c/r^2 + d/r^4 - ...).

    The inverse-square series is asymptotic, not convergent, so ``terms``
    keeps the truncation ahead of the window's reach without chasing it.
    """
    lo, hi = window
    rr = np.geomspace(lo, hi, n)
    v = traj(rr)[0] * rr ** params.two_over_pm1
    X = np.column_stack([rr ** (-2.0 * k) for k in range(terms)])
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    fitted = X @ coef
    ell = float(coef[0])
    resid = float(np.sqrt(np.mean((v - fitted) ** 2)) / max(abs(ell), 1e-300))
    c = -float(coef[1]) / ell if ell != 0 else math.nan
    d = float(coef[2]) / ell if ell != 0 else math.nan
    return AsymptoticFit(ell=ell, c=c, d=d, window=(lo, hi), rel_residual=resid)


def _tame_horizon(params: ProblemParams, traj: ode.Trajectory, r_hi: float,
                  cfg: FitConfig) -> float | None:
    """Largest usable right end for the far-field fit.

    Two stages: a coarse horizon where the scaled trace varies slowly
    (|d ln v / d ln r| below the cap, positivity), then a trim at the onset
    of the Gaussian-mode peel, detected as the point past the minimum of
    |v - ell_hat| where the deviation turns around and grows.
    """
    r_lo = max(0.3, 1e-2 * r_hi)
    if r_hi <= r_lo * cfg.span:
        return None
    rr = np.geomspace(r_lo, r_hi, cfg.samples)
    w = traj(rr)[0]
    v = w * rr ** params.two_over_pm1
    pos = w > 0
    lv = np.where(pos, np.log(np.abs(v) + 1e-300), np.nan)
    dl = np.abs(np.diff(lv) / np.diff(np.log(rr)))
    tame = pos[1:] & pos[:-1] & (dl < cfg.slope_cap)
    b = None
    for k in range(len(rr) - 1, 0, -1):
        if rr[k] < cfg.min_radius:
            return None
        lo_idx = np.searchsorted(rr, rr[k] / cfg.span)
        if lo_idx < k and np.all(tame[lo_idx:k]):
            b = float(rr[k])
            break
    if b is None:
        return None
    # peel trim inside the coarse window
    sel = (rr >= b / (2 * cfg.span)) & (rr <= b)
    rs, vs = rr[sel], v[sel]
    if len(rs) < 8:
        return b
    flat = np.argmin(np.abs(np.diff(np.log(np.abs(vs) + 1e-300))))
    ell_hat = vs[flat]
    dev = np.abs(vs - ell_hat)
    i_min = int(np.argmin(dev + 1e-300))
    floor = max(2.0 * dev[i_min], 3e-6 * abs(ell_hat))
    for i in range(i_min + 1, len(rs)):
        if dev[i] > floor and dev[i] > dev[i - 1]:
            return float(min(b, rs[max(i - 1, i_min)]))
    return b


def shoot_from_origin(params: ProblemParams, alpha: float, window_end: float = 60.0,
                      cfg: ode.IntegratorConfig | None = None,
                      fit_cfg: FitConfig | None = None,
                      variational: bool = False) -> ForwardShot:
    """Integrate from the series start and classify the trajectory."""
    cfg = cfg or ode.IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13)
    fit_cfg = fit_cfg or FitConfig()
    is_const = abs(alpha - params.kappa) <= 4.0 * math.ulp(params.kappa)

    r0, y0, bound = series_start(params, alpha, abs_tol=cfg.abs_tol,
                                 variational=variational)
    rhs = (ode.make_profile_variational_rhs(params) if variational
           else ode.make_profile_rhs(params))
    cap = max(1e6, 1e3 * alpha)
    events = (ode.sign_change_event(), ode.blowup_event(cap))
    traj = ode.integrate(rhs, (r0, window_end), y0, cfg, events)

    crossing = traj.first_event("sign_change")
    shot = ForwardShot(alpha=alpha, params=params, trajectory=traj,
                       classification="positive", captured=False,
                       is_constant=is_const,
                       crossing_r=float(crossing) if crossing is not None else None,
                       diagnostics={"series_r": r0, "series_bound": bound,
                                    "termination": traj.termination})
    if is_const:
        shot.classification = "positive"
        return shot

    r_hi = traj.r_end if crossing is None else float(crossing) * 0.995
    b = _tame_horizon(params, traj, r_hi, fit_cfg)
    if b is not None:
        fit = fit_asymptotics(params, traj, (b / fit_cfg.span, b))
        if fit.rel_residual < fit_cfg.residual_tol and fit.ell > 0:
            shot.captured = True
            shot.fit = fit
            shot.tame_end = b
            shot.classification = "positive"
            return shot

    if crossing is not None:
        # verified bracket: positive just before, derivative negative at the root
        eps = max(1e-9, 1e-6 * crossing)
        w_before = float(traj(crossing - eps)[0])
        wr_at = float(traj(crossing)[1])
        shot.diagnostics["bracket_ok"] = bool(w_before > 0 and wr_at < 0)
        shot.classification = "sign_change"
    elif traj.termination == "blow_up" or not traj.ok:
        shot.classification = "diverged"
    else:
        shot.classification = "positive"   # positive on the window, no capture
    return shot


def shoot_with_variation(params: ProblemParams, alpha: float, window_end: float = 60.0,
                         cfg: ode.IntegratorConfig | None = None,
                         fit_cfg: FitConfig | None = None) -> ForwardShot:
    """Co-integrate the profile and its alpha-derivative."""
    return shoot_from_origin(params, alpha, window_end, cfg, fit_cfg, variational=True)


def refit(shot: ForwardShot, window_end_cap: float) -> AsymptoticFit:
    """Refit the asymptotic coefficients with the horizon capped at the
    given radius (used for window-stability checks)."""
    fit_cfg = FitConfig()
    b = min(shot.tame_end or 0.0, window_end_cap)
    if b <= 0:
        raise ValueError("shot was never captured")
    return fit_asymptotics(shot.params, shot.trajectory, (b / fit_cfg.span, b))


def log_derivative_correction_exponent(shot: ForwardShot) -> float:
    """Fit the power of the correction in w'/w = -2/((p-1) r) + 2 c r^q.

    Returns the fitted q (the far-field theory gives q = -3).
    """
    if shot.fit is None:
        raise ValueError("needs a captured shot")
    params = shot.params
    lo, hi = shot.fit.window
    rr = np.geomspace(lo, hi, 200)
    w, wr = shot.trajectory(rr)[:2]
    corr = wr / w + params.two_over_pm1 / rr
    good = np.abs(corr) > 0
    lx, ly = np.log(rr[good]), np.log(np.abs(corr[good]))
    q, _ = np.polyfit(lx, ly, 1)
    return float(q)


def membership_sweep(params: ProblemParams, alphas, window_end: float = 60.0,
                     cfg: ode.IntegratorConfig | None = None) -> list[ForwardShot]:
    """Classify a grid of shooting values (the dense-sweep oracle)."""
    from ._util import map_jobs

    cfg = cfg or ode.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    return map_jobs(lambda a: shoot_from_origin(params, a, window_end, cfg), alphas)
