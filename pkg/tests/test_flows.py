import math

import pytest

from leafavg.errors import EquilibriumStartError
from leafavg.flows import (classify_equilibrium, integrate_arclength, integrate_time,
                           make_field)
from leafavg.geometry import Point

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ALPHA, BETA = 0.8, 1.5


def replicator_velocity(x, a=ALPHA, b=BETA):
    # independent re-derivation of the competition field used by the catalog
    f = [1.0 - x[0] - a * x[1] - b * x[2],
         1.0 - x[1] - a * x[2] - b * x[0],
         1.0 - x[2] - a * x[0] - b * x[1]]
    fbar = sum(xi * fi for xi, fi in zip(x, f))
    return tuple(xi * (fi - fbar) for xi, fi in zip(x, f))


def test_torus_linear_constant_velocity():
    f = make_field("torus_linear", {"slope": GOLDEN})
    for p in [(0.0, 0.0), (0.3, 0.9), (0.99, 0.01)]:
        v = f.velocity(p)
        assert v[0] == 1.0 and v[1] == GOLDEN


def test_limit_cycle_velocity_on_circle():
    f = make_field("limit_cycle")
    assert f.velocity((1.0, 0.0)) == pytest.approx((0.0, 1.0, 0.0), abs=1e-15)


def test_may_leonard_field_values():
    f = make_field("may_leonard", {"alpha": ALPHA, "beta": BETA})
    # barycenter is the interior equilibrium of the simplex-tangent field
    assert f.velocity((1 / 3, 1 / 3, 1 / 3)) == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)
    x = (0.5, 0.3, 0.2)
    assert f.velocity(x) == pytest.approx(replicator_velocity(x), abs=1e-15)
    # tangency: component sum vanishes on the simplex
    for x in [(0.5, 0.3, 0.2), (0.1, 0.1, 0.8), (0.34, 0.33, 0.33)]:
        assert sum(f.velocity(x)) == pytest.approx(0.0, abs=1e-15)
    assert f.metadata["attracting_circuit"] is True


def test_may_leonard_non_attracting_flag():
    f = make_field("may_leonard", {"alpha": 1.2, "beta": 1.5})
    assert f.metadata["attracting_circuit"] is False
    f2 = make_field("may_leonard", {"alpha": 0.3, "beta": 1.5})  # a+b < 2
    assert f2.metadata["attracting_circuit"] is False


def test_make_field_errors():
    with pytest.raises(KeyError):
        make_field("bowen_exact")
    with pytest.raises(ValueError):
        make_field("torus_linear", {})
    with pytest.raises(ValueError):
        make_field("linear", {"a11": 1.0, "a12": 0.0, "a21": 0.0, "a22": 1.0, "zz": 3.0})


def test_integrate_time_torus_winding():
    f = make_field("torus_linear", {"slope": 0.0})
    orbit = integrate_time(f, (0.0, 0.0), 1.0)
    end = orbit.final_point
    assert min(end.x, 1.0 - end.x) < 1e-9 and abs(end.y) < 1e-12
    assert orbit.windings[-1] == (1, 0)


def test_integrate_time_linear_sink():
    f = make_field("linear", {"a11": -1, "a12": 0, "a21": 0, "a22": -1})
    tol = 1e-9
    orbit = integrate_time(f, (1.0, 0.0), 1.0, tol=tol)
    assert orbit.final_point.x == pytest.approx(math.exp(-1.0), abs=10 * tol)
    assert abs(orbit.final_point.y) < 10 * tol


def test_integrate_time_limit_cycle_period():
    f = make_field("limit_cycle")
    tol = 1e-9
    orbit = integrate_time(f, (1.0, 0.0), 2.0 * math.pi, tol=tol)
    assert orbit.final_point.x == pytest.approx(1.0, abs=10 * tol)
    assert orbit.final_point.y == pytest.approx(0.0, abs=10 * tol)


def test_integrate_arclength_unit_speed_torus_matches_time():
    f = make_field("torus_linear", {"slope": GOLDEN, "unit_speed": 1})
    traj = integrate_arclength(f, (0.0, 0.0), 2.0, tol=1e-10)
    norm = math.sqrt(1.0 + GOLDEN ** 2)
    for s, t, p in traj.samples[:: max(1, len(traj.samples) // 16)]:
        assert t == pytest.approx(s, abs=1e-9)  # unit speed: s = t
        assert p.x == pytest.approx((s / norm) % 1.0, abs=1e-8)
        assert p.y == pytest.approx((s * GOLDEN / norm) % 1.0, abs=1e-8)


def test_integrate_arclength_sink_ray():
    f = make_field("linear", {"a11": -1, "a12": 0, "a21": 0, "a22": -1})
    traj = integrate_arclength(f, (1.0, 0.0), 0.5, tol=1e-10)
    assert traj.final_point.x == pytest.approx(0.5, abs=1e-8)
    assert traj.elapsed_time == pytest.approx(math.log(2.0), abs=1e-8)


def test_integrate_arclength_halts_at_equilibrium():
    f = make_field("linear", {"a11": -1, "a12": 0, "a21": 0, "a22": -1})
    traj = integrate_arclength(f, (1.0, 0.0), 2.0, tol=1e-9)
    assert traj.termination == "equilibrium_approach"
    assert traj.final_arclength == pytest.approx(1.0, abs=1e-6)


def test_integrate_arclength_rejects_equilibrium_start():
    f = make_field("limit_cycle")
    with pytest.raises(EquilibriumStartError):
        integrate_arclength(f, (0.0, 0.0), 1.0)


def test_arclength_chord_fidelity():
    f = make_field("limit_cycle")
    traj = integrate_arclength(f, (1.0, 0.0), 2.0, tol=1e-10)
    chord = 0.0
    prev = traj.samples[0][2]
    for _, _, p in traj.samples[1:]:
        chord += math.dist(prev, p)
        prev = p
    s_total = traj.final_arclength
    # chords underestimate arcs by (ds * curvature)^2/24 per sample
    assert abs(chord - s_total) <= 1e-6 * s_total


def test_parametrization_consistency():
    f = make_field("limit_cycle")
    tol = 1e-10
    traj = integrate_arclength(f, (1.0, 0.0), 1.5, tol=tol)
    orbit = integrate_time(f, (1.0, 0.0), traj.elapsed_time, tol=tol)
    assert math.dist(orbit.final_point, traj.final_point) < 10 * 1e-8


def test_simplex_invariance():
    f = make_field("may_leonard", {"alpha": ALPHA, "beta": BETA})
    orbit = integrate_time(f, (0.5, 0.3, 0.2), 50.0, tol=1e-9)
    for _, p in orbit.samples:
        assert abs(p.x + p.y + p.z - 1.0) < 1e-9
        assert p.x > 0 and p.y > 0 and p.z > 0


def test_classify_saddle():
    f = make_field("node_saddle")
    eq = classify_equilibrium(f, (0.0, 0.0))
    eigs = sorted(ev.real for ev in eq.eigenvalues)
    assert eigs == pytest.approx([-1.0, 1.0], abs=1e-6)
    assert eq.classification == "saddle"


def test_classify_may_leonard_vertex():
    f = make_field("may_leonard", {"alpha": ALPHA, "beta": BETA})
    eq = classify_equilibrium(f, (1.0, 0.0, 0.0))
    eigs = sorted(ev.real for ev in eq.eigenvalues)
    # simplex-tangent linearization: {1 - beta, 1 - alpha}
    assert eigs == pytest.approx([1.0 - BETA, 1.0 - ALPHA], abs=1e-6)
    assert eq.classification == "saddle"


def test_classify_degenerate():
    f = make_field("node_saddle", {"x_exponent": 2})
    eq = classify_equilibrium(f, (0.0, 0.0))
    assert eq.classification == "degenerate"


def test_classify_sink_and_center():
    sink = make_field("linear", {"a11": -1, "a12": 0, "a21": 0, "a22": -2})
    assert classify_equilibrium(sink, (0.0, 0.0)).classification == "sink"
    center = make_field("linear", {"a11": 0, "a12": -1, "a21": 1, "a22": 0})
    assert classify_equilibrium(center, (0.0, 0.0)).classification == "center"


def test_classify_rejects_non_equilibrium():
    f = make_field("limit_cycle")
    with pytest.raises(EquilibriumStartError):
        classify_equilibrium(f, (1.0, 0.0))


def test_may_leonard_declared_equilibria_are_equilibria():
    f = make_field("may_leonard", {"alpha": ALPHA, "beta": BETA})
    for p in f.declared_equilibria:
        assert f.speed(p) < 1e-14
