"""Time averages and length averages along orbits, and circuit limit prediction."""

from __future__ import annotations

import math
from typing import Optional

from . import engine
from .errors import EquilibriumStartError
from .flows import EPS_MIN, VectorField
from .geometry import Observable, Point, PiecewiseLinearCurve, as_point
from .running import (ConvergenceReport, ReportPolicy, RunningAverage,
                      convergence_report, geometric_grid)

__all__ = [
    "RunningAverage", "ConvergenceReport", "ReportPolicy", "convergence_report",
    "time_average", "length_average_forward", "length_average_leaf",
    "circuit_limit_predictor",
]

DEFAULT_TOL = 1e-9


def _grid(limit: float):
    g = geometric_grid(limit)
    return [v for v in g if v <= limit * (1.0 + 1e-12)]


def time_average(fld: VectorField, x0, observable: Observable, t_max: float,
                 tol: float = DEFAULT_TOL, atol: Optional[float] = None) -> RunningAverage:
    """Partial averages (1/T) int_0^T phi(f^t x0) dt on the geometric T grid.

    If the orbit runs into an equilibrium the average is continued with the
    terminal point frozen, which is the exact limit behaviour.
    """
    x0 = as_point(x0)
    engine.require_moving_start(fld, x0, EPS_MIN)
    if t_max <= 1.0:
        raise ValueError("t_max must exceed the first grid point 1.0")
    targets = _grid(t_max)
    run = engine.propagate(fld, x0, tol=tol, atol=atol, t_max=t_max,
                           observables=(observable,), time_integrals=True,
                           sample_targets=targets, sample_by="t", speed_halt=EPS_MIN)
    d = run.chart.dim
    it_index = d + 2  # (q, s, I_arc, I_time)
    samples = [(tgt, u[it_index] / tgt) for tgt, _, u in run.grid_samples]
    if run.termination == "equilibrium_approach":
        t_halt = run.t_end
        i_halt = run.state_end[it_index]
        phi_end = observable(run.phase_end())
        for tgt in targets[len(samples):]:
            samples.append((tgt, (i_halt + phi_end * (tgt - t_halt)) / tgt))
        term = "equilibrium_approach"
    else:
        term = run.termination
    return RunningAverage(parameter_kind="time", samples=tuple(samples),
                          observable_id=observable.id, termination=term)


def _forward_arc_run(fld, x0, observable, s_max, tol, atol):
    targets = _grid(s_max)
    run = engine.propagate(fld, x0, tol=tol, atol=atol, s_max=s_max,
                           t_max=math.inf, observables=(observable,),
                           sample_targets=targets, sample_by="s", speed_halt=EPS_MIN)
    d = run.chart.dim
    samples = [(tgt, u[d + 1]) for tgt, _, u in run.grid_samples]  # (s, int phi ds)
    return samples, run


def length_average_forward(fld: VectorField, x0, observable: Observable, s_max: float,
                           tol: float = DEFAULT_TOL, atol: Optional[float] = None) -> RunningAverage:
    """Partial length averages (1/s) int phi over the forward arc of length s.

    On equilibrium approach before ``s_max`` the partial samples are returned
    with the matching termination flag.
    """
    x0 = as_point(x0)
    engine.require_moving_start(fld, x0, EPS_MIN)
    if s_max <= 1.0:
        raise ValueError("s_max must exceed the first grid point 1.0")
    samples, run = _forward_arc_run(fld, x0, observable, s_max, tol, atol)
    avg = tuple((s, i / s) for s, i in samples)
    return RunningAverage(parameter_kind="arclength", samples=avg,
                          observable_id=observable.id, termination=run.termination)


def length_average_leaf(fld: VectorField, x0, observable: Observable, s_max: float,
                        tol: float = DEFAULT_TOL, atol: Optional[float] = None) -> RunningAverage:
    """Two-sided leaf averages over the arclength ball of radius r around x0.

    The ball is the forward arc of length r joined with the backward arc of
    length min(r, available backward length); a finite backward (or forward)
    leg truncates at the leaf end.
    """
    x0 = as_point(x0)
    engine.require_moving_start(fld, x0, EPS_MIN)
    fwd, fwd_run = _forward_arc_run(fld, x0, observable, s_max, tol, atol)
    bwd_targets = _grid(s_max)
    bwd_run = engine.propagate(fld, x0, tol=tol, atol=atol, s_max=s_max,
                               direction=-1, observables=(observable,),
                               sample_targets=bwd_targets, sample_by="s",
                               speed_halt=EPS_MIN)
    d = bwd_run.chart.dim
    bwd = {tgt: u[d + 1] for tgt, _, u in bwd_run.grid_samples}
    bwd_len = bwd_run.s_end
    bwd_total = bwd_run.state_end[d + 1]
    fwd_len = fwd_run.s_end
    fwd_total = fwd_run.state_end[d + 1]

    def backward_at(r):
        if r in bwd:
            return r, bwd[r]
        if r >= bwd_len:
            return bwd_len, bwd_total
        return None, None  # target not materialized (ended between grid points)

    samples = []
    fwd_map = dict(fwd)
    for r in _grid(s_max):
        if r in fwd_map:
            flen, fint = r, fwd_map[r]
        elif r >= fwd_len:
            flen, fint = fwd_len, fwd_total
        else:
            continue
        blen, bint = backward_at(r)
        if blen is None:
            continue
        denom = flen + blen
        if denom <= 0.0:
            continue
        samples.append((r, (fint + bint) / denom))
    term = fwd_run.termination if fwd_run.termination != "horizon_reached" else bwd_run.termination
    return RunningAverage(parameter_kind="arclength", samples=tuple(samples),
                          observable_id=observable.id, termination=term)


def circuit_limit_predictor(circuit: PiecewiseLinearCurve, observable: Observable,
                            resolution: int = 16) -> float:
    """Arclength average of the observable over a closed polyline circuit."""
    if not circuit.is_closed(tol=1e-12):
        raise ValueError("circuit must be a closed polyline")
    from .geometry import curve_running_average

    avg = curve_running_average(circuit, observable, [circuit.length], resolution=resolution)
    return avg.final[1]
