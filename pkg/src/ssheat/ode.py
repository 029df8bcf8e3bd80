"""Shared numerical kernel for the profile equation and its linearizations.

Right-hand sides are provided for

  * the profile equation   w'' + ((N-1)/r - r/2) w' - w/(p-1) + w|w|^(p-1) = 0,
  * its variational system (derivative with respect to the initial amplitude),
  * the rescaled form in v = w r^(2/(p-1)), which turns the singular profile
    into a constant and is the well-conditioned state for inward integration,
  * the linearization around an arbitrary positive profile, and around the
    singular profile in particular.

Integration is delegated to an adaptive embedded Runge-Kutta method (DOP853
by default) with dense output; sign changes and blow-up are located by the
solver's event machinery, which polishes event times on the dense
interpolant.  The nonlinearity is written as w * (|w|^(p-1) - 1/(p-1)) so
that it vanishes bit-exactly on the tuned equilibrium constants from
:mod:`ssheat.params`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .params import ProblemParams


def omega(r, N: int):
    """Gaussian-type weight r^(N-1) exp(-r^2/4) of the linearized problem."""
    r = np.asarray(r, dtype=float)
    out = r ** (N - 1) * np.exp(-r * r / 4.0)
    return float(out) if out.ndim == 0 else out


def log_omega(r, N: int):
    r = np.asarray(r, dtype=float)
    out = (N - 1) * np.log(r) - r * r / 4.0
    return float(out) if out.ndim == 0 else out


def wronskian(psi, psi_r, phi, phi_r):
    """W = psi' * phi - psi * phi' for two states at a common radius."""
    return psi_r * phi - psi * phi_r


class IntegrationFailure(RuntimeError):
    """Step-size underflow or solver breakdown; carries the last state."""

    def __init__(self, message, r=None, state=None):
        super().__init__(message)
        self.r = r
        self.state = state


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_step: float = math.inf
    method: str = "DOP853"
    dense_output: bool = True
    r_start: float | None = None
    r_end: float | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.r_start is not None and self.r_end is not None and not self.r_start < self.r_end:
            raise ValueError("r_start must be below r_end")


@dataclass
class EventSpec:
    fn: callable
    name: str
    terminal: bool = True
    direction: float = 0.0


def sign_change_event(component: int = 0, direction: float = -1.0, terminal: bool = True) -> EventSpec:
    def fn(r, y):
        return y[component]
    return EventSpec(fn=fn, name="sign_change", terminal=terminal, direction=direction)


def blowup_event(cap: float, component: int = 0) -> EventSpec:
    def fn(r, y):
        return abs(y[component]) - cap
    return EventSpec(fn=fn, name="blow_up", terminal=True, direction=1.0)


@dataclass
class Trajectory:
    """Result of one integration: nodes, dense interpolant, event log."""

    r: np.ndarray
    y: np.ndarray
    sol: object
    termination: str            # "reached_end" | event name | "failure"
    message: str = ""
    events: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.termination != "failure"

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.y[:, -1]

    def __call__(self, r):
        return self.sol(r)

    def first_event(self, name: str) -> float | None:
        ts = self.events.get(name)
        if ts is None or len(ts) == 0:
            return None
        return float(ts[0])


def integrate(rhs, span, y0, cfg: IntegratorConfig | None = None,
              events: tuple[EventSpec, ...] = ()) -> Trajectory:
    """Integrate ``rhs`` over ``span`` (increasing or decreasing in r)."""
    cfg = cfg or IntegratorConfig()
    ev_fns = []
    for spec in events:
        f = spec.fn
        f.terminal = spec.terminal
        f.direction = spec.direction
        ev_fns.append(f)
    res = solve_ivp(rhs, span, np.asarray(y0, dtype=float), method=cfg.method,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
                    dense_output=cfg.dense_output, events=ev_fns or None)
    ev_log = {}
    termination = "reached_end"
    if events:
        for spec, ts in zip(events, res.t_events):
            if len(ts):
                ev_log[spec.name] = ts
    if res.status == 1:
        # terminated by the first terminal event that fired
        fired = [(spec.name, ts[0]) for spec, ts in zip(events, res.t_events)
                 if spec.terminal and len(ts)]
        fired.sort(key=lambda kv: kv[1], reverse=span[1] < span[0])
        termination = fired[0][0] if fired else "reached_end"
    elif res.status < 0:
        termination = "failure"
    return Trajectory(r=res.t, y=res.y, sol=res.sol, termination=termination,
                      message=res.message or "", events=ev_log)


# ---------------------------------------------------------------------------
# right-hand sides


def make_profile_rhs(params: ProblemParams):
    """Profile equation as a first-order system in (w, w')."""
    N, pm1, a = params.N, params.p - 1.0, params.one_over_pm1

    def rhs(r, y):
        w, wr = float(y[0]), float(y[1])
        drift = (N - 1) / r - r / 2.0
        nonlin = w * (math.pow(abs(w), pm1) - a)   # w|w|^(p-1) - w/(p-1)
        return (wr, -drift * wr - nonlin)

    return rhs


def make_profile_variational_rhs(params: ProblemParams):
    """Profile plus variational state (w, w', z, z'), z = dw/dalpha."""
    N, p, pm1, a = params.N, params.p, params.p - 1.0, params.one_over_pm1

    def rhs(r, y):
        w, wr, z, zr = (float(v) for v in y)
        drift = (N - 1) / r - r / 2.0
        wp = math.pow(abs(w), pm1)
        nonlin = w * (wp - a)
        return (wr, -drift * wr - nonlin, zr, -drift * zr - (p * wp - a) * z)

    return rhs


def make_v_rhs(params: ProblemParams):
    """Rescaled equation for v = w r^(2/(p-1)).

    v'' + ((N-1-4/(p-1))/r - r/2) v' + (v|v|^(p-1) - L^(p-1) v)/r^2 = 0.
    The singular profile is the constant v = L, which the tuned constants
    preserve bit-exactly.  Requires p(N-2) > N.
    """
    if params.L_pm1 is None:
        raise ValueError("v-form requires p(N-2) > N")
    N, pm1, Lpm1 = params.N, params.p - 1.0, params.L_pm1
    drift_dim = N - 1 - 4.0 / pm1

    def rhs(r, y):
        v, vr = float(y[0]), float(y[1])
        drift = drift_dim / r - r / 2.0
        nonlin = v * (math.pow(abs(v), pm1) - Lpm1)
        return (vr, -drift * vr - nonlin / (r * r))

    return rhs


def v_state_to_w(r: float, v: float, vr: float, params: ProblemParams) -> tuple[float, float]:
    """Convert (v, v') at radius r back to (w, w')."""
    k = params.two_over_pm1
    scale = r ** (-k)
    return v * scale, (vr - k * v / r) * scale


def w_state_to_v(r: float, w: float, wr: float, params: ProblemParams) -> tuple[float, float]:
    k = params.two_over_pm1
    scale = r ** k
    return w * scale, (wr + k * w / r) * scale


def make_linearized_rhs(params: ProblemParams, profile):
    """Linearization z'' + ((N-1)/r - r/2) z' + (-1/(p-1) + p|phi|^(p-1)) z = 0
    around a given profile; ``profile`` maps r to phi(r)."""
    N, p, pm1, a = params.N, params.p, params.p - 1.0, params.one_over_pm1

    def rhs(r, y):
        z, zr = float(y[0]), float(y[1])
        drift = (N - 1) / r - r / 2.0
        q = p * math.pow(abs(float(profile(r))), pm1) - a
        return (zr, -drift * zr - q * z)

    return rhs


def make_singular_linearized_rhs(params: ProblemParams, lam: float = 0.0):
    """Linearization around the singular profile, with spectral shift lam:
    z'' + ((N-1)/r - r/2) z' + (-1/(p-1) + p L^(p-1)/r^2 + lam) z = 0."""
    if params.L_pm1 is None:
        raise ValueError("singular linearization requires p(N-2) > N")
    N, p, a, Lpm1 = params.N, params.p, params.one_over_pm1, params.L_pm1
    pL = p * Lpm1

    def rhs(r, y):
        z, zr = float(y[0]), float(y[1])
        drift = (N - 1) / r - r / 2.0
        q = pL / (r * r) - a + lam
        return (zr, -drift * zr - q * z)

    return rhs


def make_linear_pair_rhs(params: ProblemParams, profile=None, singular: bool = False):
    """Two co-integrated solutions (psi, psi', phi, phi') of the same
    linearization, around ``profile`` or around the singular profile."""
    N, p, pm1, a = params.N, params.p, params.p - 1.0, params.one_over_pm1
    if singular:
        pL = p * params.L_pm1

        def q_of(r):
            return pL / (r * r) - a
    else:
        def q_of(r):
            return p * math.pow(abs(float(profile(r))), pm1) - a

    def rhs(r, y):
        psi, psir, phi, phir = (float(v) for v in y)
        drift = (N - 1) / r - r / 2.0
        q = q_of(r)
        return (psir, -drift * psir - q * psi, phir, -drift * phir - q * phi)

    return rhs


def make_profile_linear_pair_rhs(params: ProblemParams):
    """Six-dimensional system: profile (w, w') plus two linearized solutions."""
    N, p, pm1, a = params.N, params.p, params.p - 1.0, params.one_over_pm1

    def rhs(r, y):
        w, wr, psi, psir, phi, phir = (float(v) for v in y)
        drift = (N - 1) / r - r / 2.0
        wp = math.pow(abs(w), pm1)
        q = p * wp - a
        return (wr, -drift * wr - w * (wp - a),
                psir, -drift * psir - q * psi,
                phir, -drift * phir - q * phi)

    return rhs


def profile_residual(params: ProblemParams, r, w, wr, wrr):
    """Residual of the profile equation at a state (r, w, w', w'')."""
    drift = (params.N - 1) / r - r / 2.0
    nonlin = w * (math.pow(abs(w), params.p - 1.0) - params.one_over_pm1)
    return wrr + drift * wr + nonlin
