"""Adaptive trajectory engine shared by the flow, section, and averaging layers.

One embedded Runge-Kutta pair (Dormand-Prince 5(4)) integrates an augmented
state u = (chart coordinates, arclength s, arc integrals, time integrals).
Carrying s and the integrals as state components puts them under the same
error control as the trajectory itself, which is what lets runs survive the
extreme step-size ranges of heteroclinic dwells.

Charts decouple what the stepper integrates from the phase points the rest of
the package sees:

* plane        - coordinates are the phase point;
* torus_cover  - integrate in the universal cover, report points mod 1;
* simplex_log  - integrate log-simplex coordinates (x = softmax(y)), which
                 keeps simplex trajectories strictly positive at any depth of
                 a saddle passage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .errors import EquilibriumStartError, NumericsError
from .geometry import Point

# Dormand-Prince 5(4) tableau (FSAL).
_A21 = (0.2,)
_A31 = (3.0 / 40.0, 9.0 / 40.0)
_A41 = (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0)
_A51 = (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0)
_A61 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
      -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_MAX_GROWTH = 10.0
_SAFETY = 0.9


def _axpy(u, h, coeffs, ks):
    out = list(u)
    n = len(u)
    for c, k in zip(coeffs, ks):
        ch = c * h
        for i in range(n):
            out[i] += ch * k[i]
    return tuple(out)


def _stages(rhs, u, k1, h):
    """One raw Dormand-Prince step: returns (u_new, k_last, error_vector)."""
    k2 = rhs(_axpy(u, h, _A21, (k1,)))
    k3 = rhs(_axpy(u, h, _A31, (k1, k2)))
    k4 = rhs(_axpy(u, h, _A41, (k1, k2, k3)))
    k5 = rhs(_axpy(u, h, _A51, (k1, k2, k3, k4)))
    k6 = rhs(_axpy(u, h, _A61, (k1, k2, k3, k4, k5)))
    u5 = _axpy(u, h, _B, (k1, k2, k3, k4, k5, k6))
    k7 = rhs(u5)
    n = len(u)
    err = [0.0] * n
    for c, k in zip(_E, (k1, k2, k3, k4, k5, k6, k7)):
        ch = c * h
        for i in range(n):
            err[i] += ch * k[i]
    return u5, k7, err


def _hermite(u0, f0, u1, f1, h, theta):
    """Cubic Hermite interpolant of the full state at fraction theta of a step."""
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return tuple(h00 * a + h10 * h * fa + h01 * b + h11 * h * fb
                 for a, fa, b, fb in zip(u0, f0, u1, f1))


class PlaneChart:
    kind = "plane"
    dim = 2
    default_max_step = 0.1
    dwell_safe = False  # small speed means a genuine equilibrium approach

    def __init__(self, fld, direction=1):
        self._eval = fld.evaluator
        self._dir = float(direction)

    def init_state(self, x0):
        return (float(x0[0]), float(x0[1]))

    def deriv(self, q):
        x = (q[0], q[1], 0.0)
        v = self._eval(x)
        sp = math.sqrt(v[0] * v[0] + v[1] * v[1])
        return (self._dir * v[0], self._dir * v[1]), sp, x

    def to_phase(self, q):
        return (q[0], q[1], 0.0)

    def winding(self, q):
        return None

    def renormalize(self, q):
        return q


class TorusCoverChart(PlaneChart):
    kind = "torus_cover"
    dwell_safe = False

    def deriv(self, q):
        x = (q[0] % 1.0, q[1] % 1.0, 0.0)
        v = self._eval(x)
        sp = math.sqrt(v[0] * v[0] + v[1] * v[1])
        return (self._dir * v[0], self._dir * v[1]), sp, x

    def to_phase(self, q):
        return (q[0] % 1.0, q[1] % 1.0, 0.0)

    def winding(self, q):
        return (int(math.floor(q[0])), int(math.floor(q[1])))


class SimplexLogChart:
    """Log coordinates on the open simplex: x = softmax(y).

    Requires the field to expose per-capita rates g with xdot_i = x_i * g_i(x);
    then ydot = g(softmax(y)), which stays bounded arbitrarily close to the
    simplex boundary.  Saddle passages slow the phase point but never stall
    the chart, so small speed here does not mean an equilibrium approach
    unless the y components have collapsed together (interior fixed point).
    """

    kind = "simplex_log"
    dim = 3
    default_max_step = math.inf
    dwell_safe = True

    def __init__(self, fld, direction=1):
        if fld.log_rates is None:
            raise NumericsError(f"field {fld.catalog_id!r} lacks per-capita rates")
        self._rates = fld.log_rates
        self._dir = float(direction)

    def init_state(self, x0):
        if min(x0[:3]) <= 0.0:
            raise EquilibriumStartError("simplex start must have strictly positive coordinates")
        m = math.log(max(x0[:3]))
        return tuple(math.log(float(c)) - m for c in x0[:3])

    @staticmethod
    def _softmax(q):
        m = max(q)
        e0, e1, e2 = math.exp(q[0] - m), math.exp(q[1] - m), math.exp(q[2] - m)
        z = e0 + e1 + e2
        return (e0 / z, e1 / z, e2 / z)

    def deriv(self, q):
        x = self._softmax(q)
        g = self._rates(x)
        sp = math.sqrt((x[0] * g[0]) ** 2 + (x[1] * g[1]) ** 2 + (x[2] * g[2]) ** 2)
        return (self._dir * g[0], self._dir * g[1], self._dir * g[2]), sp, x

    def to_phase(self, q):
        return self._softmax(q)

    def winding(self, q):
        return None

    def renormalize(self, q):
        m = max(q)
        return (q[0] - m, q[1] - m, q[2] - m)

    @staticmethod
    def near_interior_equilibrium(q):
        return max(q) - min(q) < 1.0


def make_chart(fld, direction=1):
    if fld.phase_space == "plane":
        return PlaneChart(fld, direction)
    if fld.phase_space == "torus":
        return TorusCoverChart(fld, direction)
    if fld.phase_space == "simplex":
        return SimplexLogChart(fld, direction)
    raise NumericsError(f"no chart for phase space {fld.phase_space!r}")


@dataclass
class Crossing:
    t: float
    s: float
    state: tuple
    phase: Point
    refinement_error: float


@dataclass
class Propagation:
    termination: str
    t_end: float
    state_end: tuple
    chart: object
    n_steps: int
    n_rejected: int
    step_points: list = field(default_factory=list)     # (t, state) at accepted steps
    grid_samples: list = field(default_factory=list)    # (target, t, state) at grid hits
    crossings: list = field(default_factory=list)       # Crossing records

    @property
    def s_end(self) -> float:
        return self.state_end[self.chart.dim]

    def phase_end(self) -> Point:
        return Point(*self.chart.to_phase(self.state_end[:self.chart.dim]))


_CROSS_SUBSAMPLES = 8
_MIN_CROSS_TIME = 1e-7


def propagate(fld, x0, *,
              tol: float = 1e-9,
              atol: Optional[float] = None,
              max_step: Optional[float] = None,
              max_steps: int = 1_000_000,
              t_max: float = math.inf,
              s_max: float = math.inf,
              direction: int = 1,
              observables: Sequence = (),
              time_integrals: bool = False,
              sample_targets: Optional[Sequence[float]] = None,
              sample_by: str = "t",
              collect_steps: bool = False,
              crossing_fn: Optional[Callable] = None,
              crossing_test: Optional[Callable] = None,
              max_crossings: Optional[int] = None,
              speed_halt: Optional[float] = None,
              domain_bound: float = 1e12) -> Propagation:
    """Integrate from phase point ``x0`` with augmented-state error control.

    ``sample_targets`` are strictly increasing values of t (``sample_by='t'``)
    or arclength (``'s'``) at which the full state is interpolated.
    ``crossing_fn`` maps a phase point to a signed section coordinate; each
    upward zero crossing is bisection-refined with controlled sub-steps and,
    if ``crossing_test`` accepts the hit point, recorded.  ``speed_halt``
    stops the run on equilibrium approach; on dwell-safe charts the halt
    additionally requires the chart to be near its interior equilibrium.
    """
    chart = make_chart(fld, direction)
    rtol = tol
    atol = tol if atol is None else atol
    hmax = chart.default_max_step if max_step is None else max_step
    d = chart.dim
    obs_fns = [o.fn for o in observables]
    m = len(obs_fns)
    nstate = d + 1 + m + (m if time_integrals else 0)

    def rhs(u):
        dq, sp, x = chart.deriv(u[:d])
        out = list(dq)
        out.append(sp)
        if m:
            p = Point(*x)
            vals = [f(p) for f in obs_fns]
            out.extend(v * sp for v in vals)
            if time_integrals:
                out.extend(vals)
        return tuple(out)

    q0 = chart.init_state(x0)
    u = q0 + (0.0,) * (nstate - d)
    t = 0.0
    k1 = rhs(u)
    run = Propagation(termination="horizon_reached", t_end=0.0, state_end=u,
                      chart=chart, n_steps=0, n_rejected=0)
    if collect_steps:
        run.step_points.append((0.0, u))

    targets = list(sample_targets) if sample_targets else []
    ti = 0
    sigma_prev = crossing_fn(Point(*chart.to_phase(q0))) if crossing_fn else None

    h = min(1e-6, hmax)
    err_prev = 1e-2
    just_rejected = False
    stop = False

    def param_of(state, tv):
        return tv if sample_by == "t" else state[d]

    def interp(theta, u1, k7, h):
        return _hermite(u, k1, u1, k7, h, theta)

    def refine(th_lo, th_hi, h):
        # bisection on sigma with one controlled sub-step per probe
        def sigma_at(theta):
            if theta <= 0.0:
                return sigma_start, u
            us, _, _ = _stages(rhs, u, k1, theta * h)
            return crossing_fn(Point(*chart.to_phase(us[:d]))), us
        sigma_start = sigma_prev_step
        lo, hi = th_lo, th_hi
        s_lo, _ = sigma_at(lo)
        u_hit = None
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            s_mid, u_mid = sigma_at(mid)
            if s_lo < 0.0 and s_mid < 0.0:
                lo, s_lo = mid, s_mid
            else:
                hi, u_hit = mid, u_mid
            if (hi - lo) * abs(h) <= max(1e-13, 4.0 * abs(t) * 2.3e-16):
                break
        if u_hit is None:
            _, u_hit = sigma_at(hi)
        return hi, u_hit, (hi - lo) * abs(h)

    while True:
        if run.n_steps + run.n_rejected >= max_steps:
            run.termination = "horizon_reached"
            break
        if math.isfinite(t_max):
            h = min(h, t_max - t)
        h = min(h, hmax)
        if h <= 0.0:
            run.termination = "horizon_reached"
            break
        u1, k7, err = _stages(rhs, u, k1, h)
        bad = False
        en = 0.0
        for i in range(nstate):
            ei = err[i]
            if not math.isfinite(ei) or not math.isfinite(u1[i]):
                bad = True
                break
            sc = atol + rtol * max(abs(u[i]), abs(u1[i]))
            e = abs(ei) / sc
            if e > en:
                en = e
        if bad or en > 1.0:
            run.n_rejected += 1
            h *= 0.1 if bad else min(0.5, max(0.02, _SAFETY * en ** -0.2))
            just_rejected = True
            if h < 1e-250:
                run.termination = "step_underflow"
                break
            continue

        t_new = t + h
        sigma_prev_step = sigma_prev

        # section crossings, checked on sub-samples of the accepted step
        if crossing_fn is not None:
            s_prev = sigma_prev_step
            for j in range(1, _CROSS_SUBSAMPLES + 1):
                theta = j / _CROSS_SUBSAMPLES
                uj = u1 if j == _CROSS_SUBSAMPLES else interp(theta, u1, k7, h)
                s_j = crossing_fn(Point(*chart.to_phase(uj[:d])))
                if s_prev < 0.0 <= s_j and abs(s_prev) + abs(s_j) < 0.5:
                    th0 = (j - 1) / _CROSS_SUBSAMPLES
                    sigma_prev_step = s_prev
                    th_hit, u_hit, differr = refine(th0, theta, h)
                    t_hit = t + th_hit * h
                    if t_hit > _MIN_CROSS_TIME:
                        p_hit = Point(*chart.to_phase(u_hit[:d]))
                        if crossing_test is None or crossing_test(p_hit):
                            run.crossings.append(Crossing(t=t_hit, s=u_hit[d], state=u_hit,
                                                          phase=p_hit, refinement_error=differr))
                            if max_crossings is not None and len(run.crossings) >= max_crossings:
                                t, u, k1 = t_hit, u_hit, rhs(u_hit)
                                run.termination = "crossing_target"
                                stop = True
                                break
                s_prev = s_j
            if stop:
                break
            sigma_prev = s_prev

        # grid samples inside (t, t_new]
        p_old = param_of(u, t)
        p_new = param_of(u1, t_new)
        while ti < len(targets) and p_old < targets[ti] <= p_new + 1e-18:
            tgt = targets[ti]
            if sample_by == "t":
                theta = (tgt - t) / h
                u_s = interp(theta, u1, k7, h) if 0.0 < theta < 1.0 else u1
                run.grid_samples.append((tgt, tgt, u_s))
            else:
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if interp(mid, u1, k7, h)[d] < tgt:
                        lo = mid
                    else:
                        hi = mid
                u_s = interp(hi, u1, k7, h)
                run.grid_samples.append((tgt, t + hi * h, u_s))
            ti += 1

        t = t_new
        u = chart.renormalize(u1[:d]) + u1[d:]
        k1 = k7  # FSAL; renormalization is a common shift the rhs ignores
        run.n_steps += 1
        if collect_steps:
            run.step_points.append((t, u))

        if en > 0.0:
            fac = _SAFETY * en ** -0.14 * err_prev ** 0.08
        else:
            fac = _MAX_GROWTH
        fac = min(1.0 if just_rejected else _MAX_GROWTH, max(0.2, fac))
        h *= fac
        err_prev = max(en, 1e-10)
        just_rejected = False

        speed_end = k1[d]
        if speed_halt is not None and speed_end < speed_halt:
            if not chart.dwell_safe or chart.near_interior_equilibrium(u[:d]):
                run.termination = "equilibrium_approach"
                break
        if t >= t_max * (1.0 - 1e-15):
            run.termination = "horizon_reached"
            break
        if u[d] >= s_max:
            run.termination = "horizon_reached"
            break
        if not chart.dwell_safe and max(abs(c) for c in u[:d]) > domain_bound:
            run.termination = "left_domain"
            break

    run.t_end = t
    run.state_end = u
    return run


def field_speed(fld, x0) -> float:
    v = fld.evaluator(tuple(x0) if len(x0) == 3 else (x0[0], x0[1], 0.0))
    return math.sqrt(sum(c * c for c in v))


def require_moving_start(fld, x0, eps_min: float):
    if field_speed(fld, x0) <= eps_min:
        raise EquilibriumStartError(f"start {tuple(x0)} is an equilibrium of {fld.catalog_id!r}")
