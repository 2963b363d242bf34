import math

import pytest

from leafavg.averages import (ReportPolicy, RunningAverage, circuit_limit_predictor,
                              convergence_report, length_average_forward,
                              length_average_leaf, time_average)
from leafavg.errors import EquilibriumStartError
from leafavg.flows import integrate_arclength, make_field
from leafavg.geometry import PiecewiseLinearCurve, get_observable
from leafavg.sections import CrossSection, return_sequence

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_flow_cosine_average(x0, T):
    """Closed form of (1/T) int_0^T cos(2 pi (x0 + t)) dt for the linear flow."""
    return (math.sin(2.0 * math.pi * (x0 + T)) - math.sin(2.0 * math.pi * x0)) / (2.0 * math.pi * T)


def test_time_average_constant_is_one():
    f = make_field("limit_cycle")
    avg = time_average(f, (0.5, 0.0), get_observable("one"), 50.0)
    for _, a in avg.samples:
        assert a == pytest.approx(1.0, abs=1e-12)


def test_time_average_rejects_equilibrium_start():
    f = make_field("limit_cycle")
    with pytest.raises(EquilibriumStartError):
        time_average(f, (0.0, 0.0), get_observable("one"), 10.0)


def test_time_average_torus_matches_closed_form():
    f = make_field("torus_linear", {"slope": GOLDEN})
    x0 = 0.2
    avg = time_average(f, (x0, 0.7), get_observable("cos_2pi_x"), 1000.0, tol=1e-10)
    for T, a in avg.samples[4:]:
        assert a == pytest.approx(golden_flow_cosine_average(x0, T), abs=1e-7)
    assert abs(avg.final[1]) < 1e-2


def test_time_average_sink_extends_to_fixed_point_value():
    f = make_field("linear", {"a11": -1, "a12": 0, "a21": 0, "a22": -1})
    avg = time_average(f, (1.0, 0.0), get_observable("x"), 4096.0)
    assert avg.termination == "equilibrium_approach"
    # integral of x along the orbit is 1 - e^{-T} -> 1, so average ~ 1/T
    assert avg.final[1] == pytest.approx(1.0 / 4096.0, rel=1e-3)


def test_may_leonard_time_average_oscillates():
    f = make_field("may_leonard", {"alpha": 0.8, "beta": 1.5})
    avg = time_average(f, (0.34, 0.33, 0.33), get_observable("x"), 1.0e4)
    by_param = dict(avg.samples)
    worst = 0.0
    for T, a in avg.samples:
        if 100.0 <= T <= 5000.0 and 2.0 * T in by_param:
            worst = max(worst, abs(by_param[2.0 * T] - a))
    assert worst >= 0.1


def test_length_average_unit_speed_torus_equals_time_average():
    f = make_field("torus_linear", {"slope": GOLDEN, "unit_speed": 1})
    obs = get_observable("cos_2pi_x")
    ta = time_average(f, (0.1, 0.5), obs, 200.0, tol=1e-9)
    la = length_average_forward(f, (0.1, 0.5), obs, 200.0, tol=1e-9)
    assert len(ta.samples) == len(la.samples)
    for (tp, tv), (sp, sv) in zip(ta.samples, la.samples):
        assert tp == sp
        assert tv == pytest.approx(sv, abs=1e-9)


def test_length_average_limit_cycle_x_squared():
    f = make_field("limit_cycle")
    avg = length_average_forward(f, (0.1, 0.0), get_observable("x_squared"), 1000.0)
    assert avg.final[1] == pytest.approx(0.5, abs=1e-3)
    rep = convergence_report(avg)
    assert rep.verdict == "converged"
    assert rep.estimate == pytest.approx(0.5, abs=1e-3)


def test_length_average_may_leonard_interior():
    f = make_field("may_leonard", {"alpha": 0.8, "beta": 1.5})
    avg = length_average_forward(f, (0.34, 0.33, 0.33), get_observable("x"), 120.0,
                                 tol=1e-8, atol=1e-8)
    assert avg.final[1] == pytest.approx(1.0 / 3.0, abs=2e-2)


def test_leaf_average_limit_cycle_symmetric():
    f = make_field("limit_cycle")
    avg = length_average_leaf(f, (1.0, 0.0), get_observable("x"), 256.0)
    assert abs(avg.final[1]) < 2e-3


def test_leaf_average_torus_golden():
    f = make_field("torus_linear", {"slope": GOLDEN})
    avg = length_average_leaf(f, (0.0, 0.2), get_observable("cos_2pi_x"), 1000.0)
    assert abs(avg.final[1]) < 1e-2


def test_leaf_average_may_leonard_backward_arc_finite():
    # backward orbit spirals into the interior source: bounded backward arc,
    # so the two-sided average approaches the forward limit
    f = make_field("may_leonard", {"alpha": 0.8, "beta": 1.5})
    obs = get_observable("x")
    leaf = length_average_leaf(f, (0.34, 0.33, 0.33), obs, 120.0, tol=1e-8, atol=1e-8)
    fwd = length_average_forward(f, (0.34, 0.33, 0.33), obs, 120.0, tol=1e-8, atol=1e-8)
    assert leaf.final[1] == pytest.approx(fwd.final[1], abs=5e-3)
    assert leaf.final[1] == pytest.approx(1.0 / 3.0, abs=2e-2)


def unit_circle_polyline(n=10_000):
    pts = [(math.cos(2.0 * math.pi * k / n), math.sin(2.0 * math.pi * k / n))
           for k in range(n)]
    pts.append(pts[0])
    return PiecewiseLinearCurve.from_points(pts)


def simplex_triangle():
    return PiecewiseLinearCurve.from_points(
        [(1, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0)])


def test_circuit_predictor_triangle():
    val = circuit_limit_predictor(simplex_triangle(), get_observable("x"))
    assert val == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_circuit_predictor_unit_circle():
    circle = unit_circle_polyline()
    assert circuit_limit_predictor(circle, get_observable("x")) == pytest.approx(0.0, abs=1e-6)
    assert circuit_limit_predictor(circle, get_observable("x_squared")) == pytest.approx(0.5, abs=1e-4)


def test_circuit_predictor_rejects_open_curve():
    open_curve = PiecewiseLinearCurve.from_points([(0, 0), (1, 0), (1, 1)])
    with pytest.raises(ValueError):
        circuit_limit_predictor(open_curve, get_observable("x"))


def test_limit_cycle_estimate_matches_circuit_predictor():
    f = make_field("limit_cycle")
    avg = length_average_forward(f, (0.3, 0.0), get_observable("x_squared"), 300.0)
    rep = convergence_report(avg)
    pred = circuit_limit_predictor(unit_circle_polyline(), get_observable("x_squared"))
    assert rep.verdict == "converged"
    assert rep.estimate == pytest.approx(pred, abs=2e-2)


def test_report_constant_series():
    samples = tuple((float(2 ** (k / 4)), 3.25) for k in range(1, 30))
    rep = convergence_report(RunningAverage("count", samples, "const"))
    assert rep.verdict == "converged"
    assert rep.estimate == pytest.approx(3.25, abs=1e-12)
    assert rep.limsup_hat >= rep.liminf_hat


def test_report_log3_oscillation_diverges():
    samples = tuple((float(k), 0.5 * (-1.0) ** int(math.log(k) / math.log(3.0)))
                    for k in range(1, 2001))
    rep = convergence_report(RunningAverage("count", samples, "osc"))
    assert rep.verdict == "diverged"


def test_report_requires_enough_samples():
    short = tuple((float(k), 1.0) for k in range(1, 5))
    with pytest.raises(ValueError):
        convergence_report(RunningAverage("count", short, "x"))
    narrow = tuple((100.0 + k, 1.0) for k in range(10))
    with pytest.raises(ValueError):
        convergence_report(RunningAverage("count", narrow, "x"))


def test_report_policy_fields():
    rep = convergence_report(
        RunningAverage("count", tuple((float(2 ** k), 1.0) for k in range(10)), "x"),
        ReportPolicy(tolerance=5e-3))
    assert "tol=0.005" in rep.window_policy


def test_return_sum_decomposition_limit_cycle():
    # the arc integral up to the N-th return must equal the sum of the
    # per-return arc integrals; cross-checked against trapezoid quadrature
    # along an independently sampled arclength trajectory
    f = make_field("limit_cycle")
    obs = get_observable("x_squared")
    sec = CrossSection.segment((1e-8, 0.0), (1.5, 0.0), orientation=1)
    recs = return_sequence(f, sec, (1.0, 0.0), 2, tol=1e-11,
                           observables=[obs])
    total_arc = sum(r.return_arc_length for r in recs)
    total_int = sum(r.arc_integrals["x_squared"] for r in recs)
    traj = integrate_arclength(f, (1.0, 0.0), total_arc, tol=1e-11, sample_ds=5e-4)
    quad = 0.0
    prev_s, prev_v = 0.0, obs(traj.samples[0][2])
    for s, _, p in traj.samples[1:]:
        v = obs(p)
        quad += 0.5 * (v + prev_v) * (s - prev_s)
        prev_s, prev_v = s, v
    assert total_int == pytest.approx(quad, rel=1e-6)
    # ratio |B^+| / N approaches the asymptotic return arc length
    assert total_arc / len(recs) == pytest.approx(2.0 * math.pi, rel=1e-6)


def test_return_sum_decomposition_may_leonard():
    f = make_field("may_leonard", {"alpha": 0.8, "beta": 1.5})
    obs = get_observable("x")
    m = (0.5, 0.0, 0.5)
    inward = (-1.0 / math.sqrt(6.0), 2.0 / math.sqrt(6.0), -1.0 / math.sqrt(6.0))
    a = tuple(mi - 0.05 * ni for mi, ni in zip(m, inward))
    b = tuple(mi + 0.25 * ni for mi, ni in zip(m, inward))
    sec = CrossSection.segment(a, b, orientation=1)
    recs = return_sequence(f, sec, (0.34, 0.33, 0.33), 4, tol=1e-9, observables=[obs])
    total_arc = sum(r.return_arc_length for r in recs)
    total_int = sum(r.arc_integrals["x"] for r in recs)
    avg = length_average_forward(f, (0.34, 0.33, 0.33), obs, total_arc * 1.05, tol=1e-9)
    # integral at s = total_arc interpolated from neighbouring grid samples
    below = [(s, v * s) for s, v in avg.samples if s <= total_arc]
    above = [(s, v * s) for s, v in avg.samples if s > total_arc]
    s0, i0 = below[-1]
    s1, i1 = above[0]
    interp = i0 + (i1 - i0) * (total_arc - s0) / (s1 - s0)
    assert total_int == pytest.approx(interp, rel=2e-3)
