"""Cross-sections, first-return records, and the omega-limit classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from . import engine
from .errors import (EquilibriumStartError, NoReturnError, OrbitHitsEquilibriumError,
                     SectionGrazeError)
from .flows import EPS_MIN, VectorField
from .geometry import Observable, Point, as_point

RETURN_TIME_HORIZON = 1e6
RETURN_STEP_HORIZON = 100_000
GRAZE_TOL = 1e-10


def _plane_normal(phase_space: str):
    if phase_space == "simplex":
        r = 1.0 / math.sqrt(3.0)
        return (r, r, r)
    return (0.0, 0.0, 1.0)


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


@dataclass(frozen=True)
class CrossSection:
    """Transversal segment (or a torus circle) for first-return maps.

    Segment sections live in the phase plane of the field (the embedding
    plane for simplex systems).  ``orientation`` picks which crossing
    direction counts: +1 counts crossings moving along the section normal.
    ``closed`` includes the endpoints; grazing within ``GRAZE_TOL`` of an
    endpoint is always an error.
    """

    a: Point
    b: Point
    orientation: int = 1
    closed: bool = False
    kind: str = "segment"  # segment | torus_circle
    axis: int = 0          # torus_circle: coordinate that crosses ``value``
    value: float = 0.0

    def __post_init__(self):
        if self.kind == "segment" and self.a == self.b:
            raise ValueError("section endpoints must be distinct")
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be +1 or -1")

    @classmethod
    def segment(cls, a, b, orientation: int = 1, closed: bool = False) -> "CrossSection":
        return cls(a=as_point(a), b=as_point(b), orientation=orientation, closed=closed)

    @classmethod
    def torus_circle(cls, axis: int = 0, value: float = 0.0) -> "CrossSection":
        p0 = Point(value, 0.0, 0.0) if axis == 0 else Point(0.0, value, 0.0)
        p1 = Point(value, 1.0, 0.0) if axis == 0 else Point(1.0, value, 0.0)
        return cls(a=p0, b=p1, kind="torus_circle", axis=axis, value=value % 1.0)

    def geometry(self, phase_space: str):
        """Unit direction and signed-normal used for crossing detection."""
        if self.kind == "torus_circle":
            return None, None
        d = tuple(bi - ai for ai, bi in zip(self.a, self.b))
        dlen = math.sqrt(sum(c * c for c in d))
        dhat = tuple(c / dlen for c in d)
        n = _cross(_plane_normal(phase_space), dhat)
        nlen = math.sqrt(sum(c * c for c in n))
        nhat = tuple(self.orientation * c / nlen for c in n)
        return dhat, nhat

    def coordinate(self, p: Point) -> float:
        """Position along the section: u in [0, 1] for segments, angle for circles."""
        if self.kind == "torus_circle":
            return (p.y if self.axis == 0 else p.x) % 1.0
        d = tuple(bi - ai for ai, bi in zip(self.a, self.b))
        d2 = sum(c * c for c in d)
        return sum((pi - ai) * di for pi, ai, di in zip(p, self.a, d)) / d2

    def validate_transversal(self, fld: VectorField, n_samples: int = 33) -> float:
        """Minimum |A . n| over sampled section points (must stay positive)."""
        if self.kind == "torus_circle":
            margin = math.inf
            for k in range(n_samples):
                y = k / n_samples
                p = Point(self.value, y, 0.0) if self.axis == 0 else Point(y, self.value, 0.0)
                margin = min(margin, abs(fld.velocity(p)[self.axis]))
        else:
            _, nhat = self.geometry(fld.phase_space)
            margin = math.inf
            for k in range(n_samples):
                th = k / (n_samples - 1)
                p = Point(*(ai + th * (bi - ai) for ai, bi in zip(self.a, self.b)))
                v = fld.velocity(p)
                margin = min(margin, abs(sum(vi * ni for vi, ni in zip(v, nhat))))
        if margin <= 0.0:
            raise ValueError("section is not transverse to the field")
        return margin


@dataclass(frozen=True)
class ReturnRecord:
    """One Poincare return: section point, image, time, arc length, arc integrals."""

    x: Point
    image: Point
    return_time: float
    return_arc_length: float
    arc_integrals: dict
    crossing_refinement_error: float
    section_coordinate: float


def _crossing_fn(section: CrossSection, phase_space: str):
    if section.kind == "torus_circle":
        axis, value = section.axis, section.value

        def sigma(p: Point) -> float:
            c = (p.x if axis == 0 else p.y) - value
            return (c + 0.5) % 1.0 - 0.5

        return sigma
    _, nhat = section.geometry(phase_space)
    a = section.a

    def sigma(p: Point) -> float:
        return sum((pi - ai) * ni for pi, ai, ni in zip(p, a, nhat))

    return sigma


def _hit_test(section: CrossSection):
    if section.kind == "torus_circle":
        return lambda p: True
    lo, hi = (0.0, 1.0) if section.closed else (GRAZE_TOL, 1.0 - GRAZE_TOL)

    def test(p: Point) -> bool:
        u = section.coordinate(p)
        if abs(u) <= GRAZE_TOL or abs(u - 1.0) <= GRAZE_TOL:
            raise SectionGrazeError(f"crossing grazes a section endpoint (u = {u:.3g})")
        return lo <= u <= hi

    return test


def _run_returns(fld, section, x, count, observables, tol, time_horizon, step_horizon):
    x = as_point(x)
    engine.require_moving_start(fld, x, EPS_MIN)
    sigma = _crossing_fn(section, fld.phase_space)
    run = engine.propagate(fld, x, tol=tol, t_max=time_horizon, max_steps=step_horizon,
                           observables=observables, crossing_fn=sigma,
                           crossing_test=_hit_test(section), max_crossings=count,
                           speed_halt=EPS_MIN)
    d = run.chart.dim
    records = []
    prev_t, prev_s = 0.0, 0.0
    prev_I = [0.0] * len(observables)
    prev_pt = x
    for c in run.crossings:
        integrals = {obs.id: c.state[d + 1 + j] - prev_I[j]
                     for j, obs in enumerate(observables)}
        records.append(ReturnRecord(
            x=prev_pt, image=c.phase, return_time=c.t - prev_t,
            return_arc_length=c.s - prev_s, arc_integrals=integrals,
            crossing_refinement_error=c.refinement_error,
            section_coordinate=section.coordinate(c.phase)))
        prev_t, prev_s = c.t, c.s
        prev_I = [c.state[d + 1 + j] for j in range(len(observables))]
        prev_pt = c.phase
    return records, run


def first_return(fld: VectorField, section: CrossSection, x, observables: Sequence[Observable] = (),
                 tol: float = 1e-9, time_horizon: float = RETURN_TIME_HORIZON,
                 step_horizon: int = RETURN_STEP_HORIZON) -> ReturnRecord:
    """First positively-oriented section crossing of the orbit from ``x``.

    ``x`` is normally on the section; the departure itself is never counted.
    Arc length and arc integrals accumulate along the unit-speed
    parametrization of the connecting arc.
    """
    records, run = _run_returns(fld, section, x, 1, list(observables), tol,
                                time_horizon, step_horizon)
    if records:
        return records[0]
    if run.termination == "equilibrium_approach":
        raise OrbitHitsEquilibriumError("orbit approached an equilibrium before returning")
    raise NoReturnError(f"no return within horizon (t_end = {run.t_end:.3g})")


def return_sequence(fld: VectorField, section: CrossSection, x, count: int,
                    observables: Sequence[Observable] = (), tol: float = 1e-9,
                    time_horizon: float = RETURN_TIME_HORIZON,
                    step_horizon: int = RETURN_STEP_HORIZON) -> list[ReturnRecord]:
    """Chained return records; on early termination the partial list is returned
    unless it is empty, in which case the failure is raised with its index."""
    if count < 1:
        raise ValueError("count must be >= 1")
    records, run = _run_returns(fld, section, x, count, list(observables), tol,
                                time_horizon, step_horizon)
    if not records:
        if run.termination == "equilibrium_approach":
            raise OrbitHitsEquilibriumError("orbit approached an equilibrium before returning",
                                            index=0)
        raise NoReturnError("no return within horizon", index=0)
    return records


@dataclass(frozen=True)
class OmegaHorizons:
    settle_time: float = 200.0
    n_returns: int = 96
    return_time_horizon: float = 1e9
    return_step_horizon: int = 300_000
    tol: float = 1e-9


@dataclass(frozen=True)
class OmegaVerdict:
    verdict: str  # fixed_point | periodic_orbit | attracting_circuit | quasi_minimal_candidate | undecided
    evidence: dict


POSITION_CONVERGENCE_TOL = 1e-6
TIME_DIVERGENCE_FACTOR = 10.0
SPREAD_BINS = 32
SPREAD_REQUIRED = 20
FIXED_POINT_SPEED = 1e-8
FIXED_POINT_DRIFT = 1e-6


def _auto_section(fld, settle_run):
    """Transversal segment through the fastest point of the settle tail."""
    chart = settle_run.chart
    pts = settle_run.step_points
    tail = pts[len(pts) // 2:]
    best, best_sp = None, -1.0
    for _, u in tail:
        p = Point(*chart.to_phase(u[:chart.dim]))
        sp = fld.speed(p)
        if sp > best_sp:
            best, best_sp = p, sp
    v = fld.velocity(best)
    vhat = tuple(c / best_sp for c in v)
    # direction m = v x N makes the crossing normal N x m equal +v, so the
    # flow pierces the section upward and crossings count with orientation +1
    m = _cross(vhat, _plane_normal(fld.phase_space))
    mlen = math.sqrt(sum(c * c for c in m))
    mhat = tuple(c / mlen for c in m)
    coords = [abs(c) for _, u in tail for c in chart.to_phase(u[:chart.dim])]
    w = min(0.25, max(0.05, 0.25 * max(coords)))
    a = Point(*(pb - w * mb for pb, mb in zip(best, mhat)))
    b = Point(*(pb + w * mb for pb, mb in zip(best, mhat)))
    return CrossSection(a=a, b=b, orientation=1)


def classify_omega_limit(fld: VectorField, x0, horizons: Optional[OmegaHorizons] = None) -> OmegaVerdict:
    """Numeric heuristic for the forward limit set: fixed point, periodic orbit,
    attracting circuit, quasi-minimal candidate, or undecided.

    A verdict is a judgment from tail statistics (final speed and drift,
    return positions and times, section occupancy), not a proof; the
    statistics ride along in ``evidence``.
    """
    hz = horizons or OmegaHorizons()
    x0 = as_point(x0)
    try:
        engine.require_moving_start(fld, x0, EPS_MIN)
    except EquilibriumStartError:
        return OmegaVerdict("fixed_point", {"reason": "start is an equilibrium"})

    settle = engine.propagate(fld, x0, tol=hz.tol, t_max=hz.settle_time,
                              collect_steps=True, speed_halt=EPS_MIN)
    chart = settle.chart
    end_p = settle.phase_end()
    end_speed = fld.speed(end_p)
    mid_u = settle.step_points[len(settle.step_points) // 2][1]
    mid_p = Point(*chart.to_phase(mid_u[:chart.dim]))
    drift = math.dist(end_p, mid_p)
    evidence = {"final_speed": end_speed, "tail_drift": drift,
                "settle_termination": settle.termination}
    if settle.termination == "equilibrium_approach" or (
            end_speed < FIXED_POINT_SPEED and drift < FIXED_POINT_DRIFT):
        return OmegaVerdict("fixed_point", evidence)

    if fld.phase_space == "torus":
        section = CrossSection.torus_circle(axis=0, value=end_p.x)
    else:
        section = _auto_section(fld, settle)
    try:
        records = return_sequence(fld, section, end_p, hz.n_returns,
                                  tol=hz.tol, time_horizon=hz.return_time_horizon,
                                  step_horizon=hz.return_step_horizon)
    except (NoReturnError, OrbitHitsEquilibriumError) as exc:
        evidence["return_failure"] = str(exc)
        return OmegaVerdict("undecided", evidence)

    positions = [r.section_coordinate for r in records]
    times = [r.return_time for r in records]
    evidence.update({"n_returns": len(records), "return_times": times[:16],
                     "return_positions": positions[:16]})
    pos_converged = (len(positions) >= 5
                     and max(positions[-5:]) - min(positions[-5:]) <= POSITION_CONVERGENCE_TOL)
    time_growth = times[-1] / times[0] if times[0] > 0 else math.inf
    evidence["time_growth"] = time_growth
    bins = {int(min(max(u, 0.0), 0.999999) * SPREAD_BINS) for u in positions}
    evidence["occupied_bins"] = len(bins)

    if pos_converged and time_growth < TIME_DIVERGENCE_FACTOR:
        return OmegaVerdict("periodic_orbit", evidence)
    if pos_converged and time_growth >= TIME_DIVERGENCE_FACTOR:
        return OmegaVerdict("attracting_circuit", evidence)
    if not pos_converged and len(bins) >= SPREAD_REQUIRED:
        return OmegaVerdict("quasi_minimal_candidate", evidence)
    return OmegaVerdict("undecided", evidence)
