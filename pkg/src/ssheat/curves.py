"""Matching curves and enumeration of profiles.

A positive profile launched from the origin with amplitude alpha and one
launched from infinity with far-field coefficient ell describe the same
solution exactly when their phase states agree at a matching radius r0.
Reparameterizing both curves by the first component zeta = w(r0) (legitimate
wherever the respective sensitivities w_alpha(r0), u_ell(r0) do not vanish)
turns the matching condition into a scalar root problem

    F(zeta) - G(zeta) = 0,

with F and G the slopes w_r(r0) of the two families.  The enumerator builds
both curve tables over parameter grids, splits them into zeta-monotone
branches at sensitivity sign changes, brackets sign changes of F - G on the
overlap, polishes each bracket by bisection in zeta (solving alpha and ell
back out of zeta at every step), and validates each record by two-sided
profile agreement and a far-field round trip.  Unresolved zeta windows are
first-class outputs; no completeness is claimed.

Derivatives of F are available in two independent ways: the variational
ratio F' = w_r_alpha / w_alpha at r0, and for the second derivative the
weighted integral

    F'' = -p(p-1)/omega(r0) * int_0^r0 s^(N-1) e^(-s^2/4) w^(p-2) psi^3 ds,

with psi the variational solution normalized to 1 at r0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import ode, spectral
from ._util import map_jobs
from .backward import BackwardShot, PicardConfig, shoot_from_infinity
from .exponents import sobolev_exponent
from .forward import series_start, shoot_from_origin
from .params import ProblemParams


class BranchPointError(ValueError):
    """Sensitivity vanished at the matching radius: no reparameterization."""


# ---------------------------------------------------------------------------
# light shots to the matching radius

def forward_to(params: ProblemParams, alpha: float, r_stop: float,
               rel_tol: float = 1e-12) -> ode.Trajectory | None:
    """Profile plus variational state integrated to r_stop; None if the
    profile loses positivity or blows up first."""
    r_eps, y0, _ = series_start(params, alpha, variational=True)
    rhs = ode.make_profile_variational_rhs(params)
    cfg = ode.IntegratorConfig(rel_tol=rel_tol, abs_tol=1e-14)
    events = (ode.sign_change_event(), ode.blowup_event(max(1e6, 1e3 * alpha)))
    traj = ode.integrate(rhs, (r_eps, r_stop), y0, cfg, events)
    if traj.termination != "reached_end":
        return None
    return traj


@dataclass(frozen=True)
class MatchPoint:
    param: float
    zeta: float
    slope: float
    dzeta: float      # d zeta / d param
    dslope: float     # d slope / d param


@dataclass
class CurveBranch:
    points: list          # MatchPoints with strictly monotone zeta
    increasing: bool

    @property
    def zetas(self) -> np.ndarray:
        return np.array([q.zeta for q in self.points])

    @property
    def params_(self) -> np.ndarray:
        return np.array([q.param for q in self.points])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([q.slope for q in self.points])

    @property
    def zeta_range(self) -> tuple[float, float]:
        z = self.zetas
        return (float(z.min()), float(z.max()))

    def slope_at(self, zeta: float) -> float:
        z, s = self.zetas, self.slopes
        order = np.argsort(z)
        return float(np.interp(zeta, z[order], s[order]))

    def param_bracket(self, zeta: float) -> tuple[float, float]:
        z = self.zetas
        for i in range(len(z) - 1):
            if (z[i] - zeta) * (z[i + 1] - zeta) <= 0:
                return self.points[i].param, self.points[i + 1].param
        raise ValueError("zeta outside branch")


@dataclass
class CurveTable:
    kind: str                     # 'F' or 'G'
    r0: float
    points: list
    branches: list
    failures: list = field(default_factory=list)


def _split_branches(points: list) -> list:
    """Maximal runs of strictly monotone zeta."""
    branches = []
    run = [points[0]] if points else []
    direction = 0
    for q in points[1:]:
        step = q.zeta - run[-1].zeta
        d = 1 if step > 0 else (-1 if step < 0 else 0)
        if d == 0:
            branches.append(CurveBranch(run, direction > 0))
            run, direction = [q], 0
            continue
        if direction == 0:
            direction = d
            run.append(q)
        elif d == direction:
            run.append(q)
        else:
            branches.append(CurveBranch(run, direction > 0))
            run, direction = [run[-1], q], d
    if len(run) >= 2:
        branches.append(CurveBranch(run, direction > 0))
    return [b for b in branches if len(b.points) >= 2]


def build_F(params: ProblemParams, alpha_grid, r0: float) -> CurveTable:
    """Origin-side curve over an amplitude grid, with variational sensitivities."""
    def one(alpha):
        traj = forward_to(params, alpha, r0)
        if traj is None:
            return alpha, None
        w, wr, z, zr = traj.final_state
        return alpha, MatchPoint(param=alpha, zeta=float(w), slope=float(wr),
                                 dzeta=float(z), dslope=float(zr))

    results = map_jobs(one, list(alpha_grid))
    points = [q for _, q in results if q is not None]
    failures = [(a, "lost positivity before r0") for a, q in results if q is None]
    return CurveTable(kind="F", r0=r0, points=points,
                      branches=_split_branches(points), failures=failures)


def build_G(params: ProblemParams, ell_grid, r0: float,
            picard_cfg: PicardConfig | None = None) -> CurveTable:
    """Infinity-side curve over a far-field coefficient grid.

    Sensitivities come from centered grid differences (the fixed-point stage
    is re-run per ell; derivative shots would triple the cost for data used
    only to split branches and score matching radii).
    """
    def one(ell):
        try:
            shot = shoot_from_infinity(params, ell, r0, picard_cfg)
        except Exception as exc:   # contraction failure etc.
            return ell, None, str(exc)
        if not shot.positive:
            return ell, None, f"sign change at r = {shot.crossing_r}"
        w, wr = shot.w_state(r0)
        return ell, (float(w), float(wr)), ""

    raw = map_jobs(one, list(ell_grid))
    vals = [(ell, st) for ell, st, _ in raw if st is not None]
    failures = [(ell, why) for ell, st, why in raw if st is None]
    points = []
    for i, (ell, (zeta, slope)) in enumerate(vals):
        lo = max(i - 1, 0)
        hi = min(i + 1, len(vals) - 1)
        dell = vals[hi][0] - vals[lo][0]
        dz = (vals[hi][1][0] - vals[lo][1][0]) / dell if dell else math.nan
        ds = (vals[hi][1][1] - vals[lo][1][1]) / dell if dell else math.nan
        points.append(MatchPoint(param=ell, zeta=zeta, slope=slope,
                                 dzeta=dz, dslope=ds))
    return CurveTable(kind="G", r0=r0, points=points,
                      branches=_split_branches(points), failures=failures)


# ---------------------------------------------------------------------------
# curve derivatives

def curve_derivative_F1(params: ProblemParams, alpha: float, r0: float) -> float:
    """F'(zeta) = w_r_alpha(r0) / w_alpha(r0) along the origin-side curve."""
    traj = forward_to(params, alpha, r0)
    if traj is None:
        raise ValueError(f"profile from alpha={alpha} loses positivity before r0")
    w, wr, z, zr = traj.final_state
    if abs(z) < 1e-12 * (1.0 + abs(zr)):
        raise BranchPointError(f"w_alpha(r0) ~ 0 at alpha={alpha}")
    return float(zr / z)


@dataclass(frozen=True)
class F2Result:
    value: float
    divergence_regime: bool      # near-singular envelope not integrable
    quadrature_error: float


def curve_derivative_F2(params: ProblemParams, alpha: float, r0: float) -> F2Result:
    """Second curve derivative by the weighted cubic-variational integral."""
    traj = forward_to(params, alpha, r0)
    if traj is None:
        raise ValueError(f"profile from alpha={alpha} loses positivity before r0")
    z_r0 = float(traj.final_state[2])
    if abs(z_r0) < 1e-12:
        raise BranchPointError(f"w_alpha(r0) ~ 0 at alpha={alpha}")
    p, N = params.p, params.N
    r_eps = float(traj.r[0])

    def integrand(s):
        w, _, z, _ = traj(s)
        psi = z / z_r0
        return s ** (N - 1) * math.exp(-s * s / 4.0) * w ** (p - 2.0) * psi**3

    body, err = quad(integrand, r_eps, r0, limit=200, epsabs=1e-14, epsrel=1e-11)
    # tail below the series radius: integrand ~ s^(N-1) alpha^(p-2) (z0/z_r0)^3
    z0 = 1.0 / z_r0
    tail = r_eps**N / N * alpha ** (p - 2.0) * z0**3
    divergent = False
    if params.L_pm1 is not None:
        try:
            divergent = float(spectral.envelope_gamma(params)) <= -1.0
        except spectral.ComplexExponentError:
            divergent = False
    val = -p * (p - 1.0) / ode.omega(r0, N) * (body + tail)
    return F2Result(value=val, divergence_regime=divergent, quadrature_error=err)


# ---------------------------------------------------------------------------
# enumeration

@dataclass
class SearchConfig:
    alpha_max: float = 1e6
    alpha_points_per_decade: int = 24
    alpha_start_rel: float = 1.001          # grid starts at kappa * this
    ell_points: int = 120
    ell_lo: float | None = None
    ell_hi: float | None = None
    r0: float | None = None
    zeta_tol: float = 1e-10
    max_brackets: int = 64
    two_sided_samples: int = 64
    picard: PicardConfig | None = None

    def doubled(self) -> "SearchConfig":
        from dataclasses import replace

        return replace(self, alpha_points_per_decade=2 * self.alpha_points_per_decade,
                       ell_points=2 * self.ell_points)


@dataclass
class SolutionRecord:
    alpha: float
    ell: float | None
    zeta_at_r0: float
    slope_at_r0: float
    match_residual: float
    is_constant: bool = False
    two_sided_deviation: float = math.nan
    ell_roundtrip_error: float = math.nan
    ell_fit: float | None = None
    c_fit: float | None = None

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "ell": self.ell,
            "zeta": self.zeta_at_r0,
            "residual": self.match_residual,
            "constant": self.is_constant,
            "two_sided_deviation": self.two_sided_deviation,
            "ell_roundtrip_error": self.ell_roundtrip_error,
        }


@dataclass
class EnumerationResult:
    params: ProblemParams
    r0: float | None
    records: list
    unresolved: list
    f_table: CurveTable | None = None
    g_table: CurveTable | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def nonconstant_records(self) -> list:
        return [r for r in self.records if not r.is_constant]

    def as_dict(self) -> dict:
        return {
            "params": self.params.describe(),
            "r0": self.r0,
            "records": [r.as_dict() for r in self.records],
            "unresolved": self.unresolved,
        }


def _below_sobolev(params: ProblemParams) -> bool:
    ps = sobolev_exponent(params.N)
    if not ps.finite:
        return True
    if params.p_exact is not None and ps.exact is not None:
        return params.p_exact <= ps.exact
    return params.p <= ps.as_float()


def _above_joseph_lundgren(params: ProblemParams) -> bool:
    try:
        spectral.compute_spectrum(params, j_max=0)
        return True
    except spectral.ComplexExponentError:
        return False


def select_r0(params: ProblemParams, cfg: SearchConfig) -> float:
    """Matching radius maximizing the worst normalized sensitivity.

    Candidates sit in [1, 2] below the Joseph-Lundgren exponent; above it the
    amplitude parameterization degenerates outside the first sign change r1
    of the bounded zero-shift solution, so candidates move into (0.3 r1,
    0.8 r1)."""
    if cfg.r0 is not None:
        return cfg.r0
    if _above_joseph_lundgren(params):
        pair = spectral.psi1_psi2_lambda0(params, r_max=6.0)
        rr = np.geomspace(0.1, 6.0, 500)
        vals = pair.psi1(rr)[0]
        flips = rr[1:][np.sign(vals[1:]) * np.sign(vals[:-1]) < 0]
        r1 = float(flips[0]) if len(flips) else 2.0
        candidates = np.linspace(0.3 * r1, 0.8 * r1, 6)
    else:
        candidates = np.linspace(1.0, 2.0, 6)

    alphas = params.kappa * np.array([1.3, 2.5, 6.0, 20.0, 80.0, 400.0])
    ells = params.L * np.array([0.25, 0.5, 1.5, 2.0])
    worst_f, worst_g = {}, {}
    for r0 in candidates:
        fsens, gsens = [], []
        for a in alphas:
            traj = forward_to(params, a, r0, rel_tol=1e-10)
            if traj is not None:
                fsens.append(abs(traj.final_state[2]))
        for ell in ells:
            try:
                shot = shoot_from_infinity(params, ell, r0, cfg.picard)
            except Exception:
                continue
            if shot.positive:
                _, dz = shot.v_state(r0)
                gsens.append(abs(dz))
        if fsens and gsens:
            worst_f[float(r0)] = min(fsens)
            worst_g[float(r0)] = min(gsens)
    if not worst_f:
        return float(candidates[len(candidates) // 2])
    fmax = max(worst_f.values()) or 1.0
    gmax = max(worst_g.values()) or 1.0
    return max(worst_f, key=lambda r: min(worst_f[r] / fmax, worst_g[r] / gmax))


def _alpha_grid(params: ProblemParams, cfg: SearchConfig) -> np.ndarray:
    lo = params.kappa * cfg.alpha_start_rel
    decades = math.log10(cfg.alpha_max / lo)
    n = max(8, int(decades * cfg.alpha_points_per_decade))
    return np.geomspace(lo, cfg.alpha_max, n)


def _ell_grid(params: ProblemParams, cfg: SearchConfig) -> np.ndarray:
    if _above_joseph_lundgren(params):
        # the far-field coefficient of near-singular profiles is pinned
        # exponentially close to L: two-sided geometric offsets
        n = max(10, cfg.ell_points // 2)
        offs = np.geomspace(1e-11, 0.6, n)
        grid = np.concatenate([params.L * (1.0 - offs[::-1]), [params.L],
                               params.L * (1.0 + offs)])
        return np.unique(grid[grid > 0])
    lo = cfg.ell_lo if cfg.ell_lo is not None else 0.05 * params.L
    hi = cfg.ell_hi if cfg.ell_hi is not None else 6.0 * params.L
    return np.geomspace(lo, hi, cfg.ell_points)


def _solve_param_for_zeta(eval_zeta, lo: float, hi: float, zeta: float) -> float:
    f = lambda t: eval_zeta(t) - zeta
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError("bracket lost during polishing")
    return brentq(f, lo, hi, xtol=1e-15 * max(1.0, abs(hi)), rtol=8.9e-16)


def enumerate_solutions(params: ProblemParams, cfg: SearchConfig | None = None) -> EnumerationResult:
    """Bracket and polish all matching-curve intersections on the grids."""
    cfg = cfg or SearchConfig()
    kappa_record = SolutionRecord(alpha=params.kappa, ell=None,
                                  zeta_at_r0=params.kappa, slope_at_r0=0.0,
                                  match_residual=0.0, is_constant=True)
    if _below_sobolev(params):
        return EnumerationResult(params=params, r0=None, records=[kappa_record],
                                 unresolved=[],
                                 diagnostics={"regime": "subcritical-or-critical",
                                              "note": "constant profile only"})
    if params.L is None:
        return EnumerationResult(params=params, r0=None, records=[kappa_record],
                                 unresolved=[{"reason": "no singular profile: p(N-2) <= N"}],
                                 diagnostics={"regime": "no-far-field-chart"})

    r0 = select_r0(params, cfg)
    kappa_record.zeta_at_r0 = params.kappa
    f_table = build_F(params, _alpha_grid(params, cfg), r0)
    g_table = build_G(params, _ell_grid(params, cfg), r0, cfg.picard)

    # caches for polishing
    fcache: dict[float, tuple] = {}
    gcache: dict[float, BackwardShot] = {}

    def f_state(alpha: float):
        if alpha not in fcache:
            traj = forward_to(params, alpha, r0)
            if traj is None:
                raise ValueError(f"alpha={alpha} lost positivity during polish")
            fcache[alpha] = tuple(float(v) for v in traj.final_state)
        return fcache[alpha]

    def g_state(ell: float):
        if ell not in gcache:
            gcache[ell] = shoot_from_infinity(params, ell, r0, cfg.picard)
        shot = gcache[ell]
        if not shot.positive:
            raise ValueError(f"ell={ell} lost positivity during polish")
        return shot.w_state(r0)

    records: list[SolutionRecord] = [kappa_record]
    unresolved: list[dict] = []
    for a, why in f_table.failures:
        unresolved.append({"side": "F", "param": float(a), "reason": why})
    for ell, why in g_table.failures:
        unresolved.append({"side": "G", "param": float(ell), "reason": why})

    seen_alphas: list[float] = []
    n_polished = 0
    for fb in f_table.branches:
        for gb in g_table.branches:
            glo, ghi = gb.zeta_range
            pts = fb.points
            for i in range(len(pts) - 1):
                qa, qb = pts[i], pts[i + 1]
                if not (glo <= qa.zeta <= ghi and glo <= qb.zeta <= ghi):
                    continue
                Da = qa.slope - gb.slope_at(qa.zeta)
                Db = qb.slope - gb.slope_at(qb.zeta)
                if Da == 0.0 or Da * Db > 0:
                    continue
                if n_polished >= cfg.max_brackets:
                    unresolved.append({"side": "both", "alpha_lo": qa.param,
                                       "alpha_hi": qb.param,
                                       "reason": "bracket budget exhausted"})
                    continue
                n_polished += 1
                try:
                    rec = _polish(params, r0, gb, qa.param, qb.param,
                                  cfg, f_state, g_state)
                except Exception as exc:
                    unresolved.append({"side": "both", "alpha_lo": qa.param,
                                       "alpha_hi": qb.param, "reason": str(exc)})
                    continue
                if rec is not None and not any(
                        abs(rec.alpha - a0) < 1e-6 * max(1.0, a0) for a0 in seen_alphas):
                    seen_alphas.append(rec.alpha)
                    records.append(rec)

    if _above_joseph_lundgren(params):
        zeta0 = params.phi_inf(r0)
        top = max((fb.zeta_range[1] for fb in f_table.branches), default=zeta0)
        unresolved.append({"side": "F", "zeta_lo": float(top), "zeta_hi": float(zeta0),
                           "reason": "amplitude cap: tail toward the singular "
                                     "matching value not swept"})

    records.sort(key=lambda r: r.alpha)
    _validate_records(params, r0, records, cfg)
    diag = {"regime": "above-JL" if _above_joseph_lundgren(params) else "between-S-and-JL",
            "kappa_isolation_alpha_gap": _kappa_isolation_gap(params, records)}
    return EnumerationResult(params=params, r0=r0, records=records,
                             unresolved=unresolved, f_table=f_table,
                             g_table=g_table, diagnostics=diag)


def _polish(params, r0, gb: CurveBranch, a_lo: float, a_hi: float,
            cfg: SearchConfig, f_state, g_state) -> SolutionRecord | None:
    """Polish one bracket by brentq in the amplitude.

    Working in alpha keeps the root problem regular through folds of the
    origin-side curve (where w_alpha(r0) = 0 and the zeta chart degenerates);
    only the infinity side is re-solved from zeta at each evaluation.
    """
    def ell_of(z):
        lo, hi = gb.param_bracket(z)
        return _solve_param_for_zeta(lambda e: g_state(e)[0], min(lo, hi), max(lo, hi), z)

    def D(alpha):
        z, slope = f_state(alpha)[0], f_state(alpha)[1]
        return slope - g_state(ell_of(z))[1]

    a_star = brentq(D, min(a_lo, a_hi), max(a_lo, a_hi),
                    xtol=1e-14 * max(1.0, a_hi), rtol=8.9e-16)
    w, wr = f_state(a_star)[0], f_state(a_star)[1]
    e_star = ell_of(w)
    return SolutionRecord(alpha=a_star, ell=e_star, zeta_at_r0=w, slope_at_r0=wr,
                          match_residual=abs(wr - g_state(e_star)[1]))


def _validate_records(params: ProblemParams, r0: float, records: list,
                      cfg: SearchConfig) -> None:
    for rec in records:
        if rec.is_constant:
            continue
        traj = forward_to(params, rec.alpha, 2.4 * r0)
        back = shoot_from_infinity(params, rec.ell, 0.45 * r0, cfg.picard)
        rr = np.geomspace(0.5 * r0, 2.0 * r0, cfg.two_sided_samples)
        wf = traj(rr)[0] if traj is not None else np.full_like(rr, np.nan)
        wb = back.w_state(rr)[0]
        rec.two_sided_deviation = float(np.max(np.abs(wf - wb)) / np.max(np.abs(wf)))
        shot = shoot_from_origin(params, rec.alpha, window_end=14.0)
        if shot.captured:
            rec.ell_fit = shot.ell
            rec.c_fit = shot.c_alpha
            rec.ell_roundtrip_error = abs(shot.ell - rec.ell) / rec.ell
        else:
            rec.ell_roundtrip_error = math.inf


def _kappa_isolation_gap(params: ProblemParams, records: list) -> float:
    gaps = [abs(r.alpha - params.kappa) for r in records if not r.is_constant]
    return min(gaps) if gaps else math.inf
