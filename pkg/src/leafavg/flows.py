"""Vector-field catalog, ODE integration wrappers, and equilibrium classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import engine
from .errors import EquilibriumStartError
from .geometry import Point, as_point

EPS_MIN = 1e-9           # speed below which a point counts as an equilibrium candidate
DEGENERACY_TOL = 1e-6    # |eigenvalue| below this marks a degenerate linearization
JACOBIAN_STEP = 1e-5
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class VectorField:
    """Catalog-backed velocity field with known equilibria.

    ``evaluator`` maps a coordinate triple to a velocity triple.  Fields on
    the torus are 1-periodic in both coordinates and are integrated in the
    universal cover; fields on the simplex x1+x2+x3=1 additionally carry
    ``log_rates`` (per-capita rates g with xdot_i = x_i g_i) so integration
    can run in log-simplex coordinates.
    """

    catalog_id: str
    parameters: dict
    evaluator: Callable[[tuple], tuple]
    phase_space: str  # plane | torus | simplex
    declared_equilibria: Tuple[Point, ...] = ()
    log_rates: Optional[Callable[[tuple], tuple]] = None
    metadata: dict = field(default_factory=dict)

    def velocity(self, p) -> Tuple[float, float, float]:
        p = as_point(p)
        v = self.evaluator((p.x, p.y, p.z))
        return (v[0], v[1], v[2] if len(v) == 3 else 0.0)

    def speed(self, p) -> float:
        v = self.velocity(p)
        return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])

    def wrap(self, p) -> Tuple[Point, Optional[Tuple[int, int]]]:
        """Reduce a universal-cover point; returns (reduced point, winding)."""
        p = as_point(p)
        if self.phase_space != "torus":
            return p, None
        return Point(p.x % 1.0, p.y % 1.0, 0.0), (int(math.floor(p.x)), int(math.floor(p.y)))


def _linear_builder(params):
    a11 = float(params["a11"])
    a12 = float(params["a12"])
    a21 = float(params["a21"])
    a22 = float(params["a22"])

    def ev(x):
        return (a11 * x[0] + a12 * x[1], a21 * x[0] + a22 * x[1], 0.0)

    return VectorField("linear", dict(params), ev, "plane",
                       declared_equilibria=(Point(0.0, 0.0, 0.0),))


def _limit_cycle_builder(params):
    def ev(x):
        r2 = x[0] * x[0] + x[1] * x[1]
        g = 1.0 - r2
        return (x[0] * g - x[1], x[1] * g + x[0], 0.0)

    return VectorField("limit_cycle", {}, ev, "plane",
                       declared_equilibria=(Point(0.0, 0.0, 0.0),))


def _torus_linear_builder(params):
    g = float(params["slope"])
    unit = bool(int(params.get("unit_speed", 0)))
    norm = math.sqrt(1.0 + g * g)

    if unit:
        def ev(x, _g=g / norm, _o=1.0 / norm):
            return (_o, _g, 0.0)
    else:
        def ev(x, _g=g):
            return (1.0, _g, 0.0)

    return VectorField("torus_linear", {"slope": g, "unit_speed": float(unit)}, ev, "torus")


def _may_leonard_builder(params):
    """Replicator form of the three-species competition cycle on the simplex.

    Per-capita rates f_i = 1 - x_i - a*x_{i+1} - b*x_{i+2}; the field is
    xdot_i = x_i (f_i - sum_j x_j f_j), which keeps the simplex and its faces
    invariant, so the boundary triangle is a circuit of three saddles with
    tangent eigenvalues {1-a, 1-b} at each vertex.  The circuit attracts the
    interior (minus the barycenter source) exactly when 0 < a < 1 < b and
    a + b > 2.
    """
    a = float(params["alpha"])
    b = float(params["beta"])

    def rates(x):
        f1 = 1.0 - x[0] - a * x[1] - b * x[2]
        f2 = 1.0 - x[1] - a * x[2] - b * x[0]
        f3 = 1.0 - x[2] - a * x[0] - b * x[1]
        fb = x[0] * f1 + x[1] * f2 + x[2] * f3
        return (f1 - fb, f2 - fb, f3 - fb)

    def ev(x):
        g = rates(x)
        return (x[0] * g[0], x[1] * g[1], x[2] * g[2])

    attracting = (0.0 < a < 1.0 < b) and (a + b > 2.0)
    third = 1.0 / 3.0
    eqs = (Point(1.0, 0.0, 0.0), Point(0.0, 1.0, 0.0), Point(0.0, 0.0, 1.0),
           Point(third, third, third))
    return VectorField("may_leonard", {"alpha": a, "beta": b}, ev, "simplex",
                       declared_equilibria=eqs, log_rates=rates,
                       metadata={"attracting_circuit": attracting})


def _node_saddle_builder(params):
    k = int(params.get("x_exponent", 1))
    if k < 1:
        raise ValueError("x_exponent must be >= 1")

    def ev(x, _k=k):
        return (x[0] ** _k, -x[1], 0.0)

    return VectorField("node_saddle", {"x_exponent": float(k)}, ev, "plane",
                       declared_equilibria=(Point(0.0, 0.0, 0.0),))


CATALOG = {
    "linear": (_linear_builder, ("a11", "a12", "a21", "a22"), ()),
    "limit_cycle": (_limit_cycle_builder, (), ()),
    "torus_linear": (_torus_linear_builder, ("slope",), ("unit_speed",)),
    "may_leonard": (_may_leonard_builder, ("alpha", "beta"), ()),
    "node_saddle": (_node_saddle_builder, (), ("x_exponent",)),
}


def make_field(catalog_id: str, parameters: Optional[dict] = None) -> VectorField:
    """Instantiate a catalog field; unknown ids and stray parameters are rejected."""
    if catalog_id not in CATALOG:
        raise KeyError(f"unknown catalog id {catalog_id!r}; known: {sorted(CATALOG)}")
    builder, required, optional = CATALOG[catalog_id]
    params = dict(parameters or {})
    missing = [k for k in required if k not in params]
    extra = [k for k in params if k not in required and k not in optional]
    if missing or extra:
        raise ValueError(f"{catalog_id}: missing parameters {missing}, unexpected {extra}")
    return builder(params)


@dataclass(frozen=True)
class Orbit:
    """Time-parametrized orbit samples; torus points are reduced mod 1."""

    samples: Tuple[Tuple[float, Point], ...]
    termination: str
    windings: Optional[Tuple[Tuple[int, int], ...]] = None

    @property
    def final_time(self) -> float:
        return self.samples[-1][0]

    @property
    def final_point(self) -> Point:
        return self.samples[-1][1]


@dataclass(frozen=True)
class ArcTrajectory:
    """Arclength-parametrized samples (s, elapsed time, point)."""

    samples: Tuple[Tuple[float, float, Point], ...]
    termination: str

    @property
    def final_arclength(self) -> float:
        return self.samples[-1][0]

    @property
    def final_point(self) -> Point:
        return self.samples[-1][2]

    @property
    def elapsed_time(self) -> float:
        return self.samples[-1][1]


def integrate_time(fld: VectorField, x0, t_max: float, tol: float = DEFAULT_TOL,
                   max_step: Optional[float] = None) -> Orbit:
    """Integrate the flow for ``t_max`` time units from ``x0``."""
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    x0 = as_point(x0)
    run = engine.propagate(fld, x0, tol=tol, max_step=max_step, t_max=t_max,
                           collect_steps=True, speed_halt=EPS_MIN)
    chart = run.chart
    samples = []
    windings = [] if fld.phase_space == "torus" else None
    for t, u in run.step_points:
        q = u[:chart.dim]
        samples.append((t, Point(*chart.to_phase(q))))
        if windings is not None:
            windings.append(chart.winding(q))
    return Orbit(samples=tuple(samples), termination=run.termination,
                 windings=tuple(windings) if windings is not None else None)


def integrate_arclength(fld: VectorField, x0, s_max: float, tol: float = DEFAULT_TOL,
                        eps_min: float = EPS_MIN,
                        sample_ds: Optional[float] = None) -> ArcTrajectory:
    """Integrate the unit-speed reparametrization up to arclength ``s_max``.

    Halts with ``equilibrium_approach`` as soon as the speed drops below
    ``eps_min``; elapsed flow time is carried alongside.
    """
    if s_max <= 0.0:
        raise ValueError("s_max must be positive")
    x0 = as_point(x0)
    engine.require_moving_start(fld, x0, eps_min)
    if sample_ds is None:
        sample_ds = max(min(2e-3, s_max / 256.0), s_max / 100_000.0)
    n = int(math.floor(s_max / sample_ds))
    targets = [k * sample_ds for k in range(1, n + 1)]
    if not targets or targets[-1] < s_max * (1.0 - 1e-12):
        targets.append(s_max)
    run = engine.propagate(fld, x0, tol=tol, s_max=s_max, sample_targets=targets,
                           sample_by="s", speed_halt=eps_min)
    chart = run.chart
    samples = [(0.0, 0.0, x0)]
    for tgt, t_hit, u in run.grid_samples:
        samples.append((tgt, t_hit, Point(*chart.to_phase(u[:chart.dim]))))
    if run.termination != "horizon_reached" and run.s_end > samples[-1][0] * (1.0 + 1e-12):
        samples.append((run.s_end, run.t_end, run.phase_end()))
    return ArcTrajectory(samples=tuple(samples), termination=run.termination)


@dataclass(frozen=True)
class Equilibrium:
    location: Point
    eigenvalues: Tuple[complex, ...]
    classification: str  # sink | source | saddle | center | degenerate
    jacobian_step: float


def _classify_eigs(eigs, tol):
    if any(abs(ev) < tol for ev in eigs):
        return "degenerate"
    res = [ev.real for ev in eigs]
    ims = [ev.imag for ev in eigs]
    if all(abs(r) < tol for r in res) and any(abs(i) >= tol for i in ims):
        return "center"
    if all(r < -tol for r in res):
        return "sink"
    if all(r > tol for r in res):
        return "source"
    return "saddle"


def classify_equilibrium(fld: VectorField, p, h: float = JACOBIAN_STEP,
                         speed_tol: float = EPS_MIN,
                         degeneracy_tol: float = DEGENERACY_TOL) -> Equilibrium:
    """Classify an equilibrium from the central-difference Jacobian.

    For simplex fields the Jacobian is taken in an orthonormal basis of the
    tangent plane x1+x2+x3 = 0, so the reported pair are the simplex-tangent
    eigenvalues.
    """
    p = as_point(p)
    if fld.speed(p) >= speed_tol:
        raise EquilibriumStartError(
            f"{tuple(p)} is not an equilibrium candidate (|A| = {fld.speed(p):.3g})")
    if fld.phase_space == "simplex":
        basis = (np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0),
                 np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0))
    else:
        basis = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    pa = np.array([p.x, p.y, p.z])
    jac = np.empty((2, 2))
    for j, ej in enumerate(basis):
        vp = np.array(fld.velocity(Point(*(pa + h * ej))))
        vm = np.array(fld.velocity(Point(*(pa - h * ej))))
        dv = (vp - vm) / (2.0 * h)
        for i, ei in enumerate(basis):
            jac[i, j] = float(ei @ dv)
    eigs = tuple(complex(ev) for ev in np.linalg.eigvals(jac))
    return Equilibrium(location=p, eigenvalues=eigs,
                       classification=_classify_eigs(eigs, degeneracy_tol),
                       jacobian_step=h)
