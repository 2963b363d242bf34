"""Geometric primitives: points, arclength-parametrized polylines, named observables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np


class Point(NamedTuple):
    """Phase-space point. Planar systems embed with z = 0."""

    x: float
    y: float
    z: float = 0.0


def as_point(p) -> Point:
    if isinstance(p, Point):
        return p
    seq = tuple(float(c) for c in p)
    if len(seq) == 2:
        return Point(seq[0], seq[1], 0.0)
    if len(seq) == 3:
        return Point(*seq)
    raise ValueError(f"point needs 2 or 3 coordinates, got {len(seq)}")


@dataclass(frozen=True)
class Observable:
    """Named scalar function of phase-space points.

    ``fn`` maps a Point to a float.  ``array_fn``, when given, evaluates the
    same function on an (n, 3) coordinate array; large-curve integration uses
    it to stay vectorized.
    """

    id: str
    fn: Callable[[Point], float]
    description: str = ""
    array_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p: Point) -> float:
        return self.fn(p)

    def evaluate_array(self, coords: np.ndarray) -> np.ndarray:
        if self.array_fn is not None:
            return self.array_fn(coords)
        return np.array([self.fn(Point(*row)) for row in coords], dtype=float)


OBSERVABLES: dict[str, Observable] = {}


def register_observable(obs: Observable) -> Observable:
    OBSERVABLES[obs.id] = obs
    return obs


def get_observable(name: str) -> Observable:
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise KeyError(f"unknown observable {name!r}; known: {sorted(OBSERVABLES)}") from None


register_observable(Observable("one", lambda p: 1.0, "constant 1",
                               lambda c: np.ones(len(c))))
register_observable(Observable("x", lambda p: p.x, "first coordinate",
                               lambda c: c[:, 0].copy()))
register_observable(Observable("y", lambda p: p.y, "second coordinate",
                               lambda c: c[:, 1].copy()))
register_observable(Observable("z", lambda p: p.z, "third coordinate",
                               lambda c: c[:, 2].copy()))
OBSERVABLES["x1"] = OBSERVABLES["x"]
OBSERVABLES["x2"] = OBSERVABLES["y"]
OBSERVABLES["x3"] = OBSERVABLES["z"]
register_observable(Observable("x_squared", lambda p: p.x * p.x, "square of first coordinate",
                               lambda c: c[:, 0] ** 2))
register_observable(Observable("cos_2pi_x", lambda p: math.cos(2.0 * math.pi * p.x),
                               "cos(2 pi x)", lambda c: np.cos(2.0 * np.pi * c[:, 0])))
register_observable(Observable("cos_2pi_y", lambda p: math.cos(2.0 * math.pi * p.y),
                               "cos(2 pi y)", lambda c: np.cos(2.0 * np.pi * c[:, 1])))
register_observable(Observable("cos_4pi_x", lambda p: math.cos(4.0 * math.pi * p.x),
                               "cos(4 pi x)", lambda c: np.cos(4.0 * np.pi * c[:, 0])))
register_observable(Observable("sin_2pi_x", lambda p: math.sin(2.0 * math.pi * p.x),
                               "sin(2 pi x)", lambda c: np.sin(2.0 * np.pi * c[:, 0])))


@dataclass(frozen=True)
class PiecewiseLinearCurve:
    """Polyline with its cumulative arclength table.

    ``vertices`` is an (n, 3) float array, n >= 2, consecutive vertices
    distinct.  ``cumulative`` starts at 0 and increases by the Euclidean
    segment lengths, so the curve carries a unit-speed parametrization.
    """

    vertices: np.ndarray
    cumulative: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 2:
            raise ValueError("curve needs at least 2 vertices")
        if verts.shape[1] == 2:
            padded = np.zeros((verts.shape[0], 3))
            padded[:, :2] = verts
            verts = padded
        if verts.shape[1] != 3:
            raise ValueError("vertices must be (n, 2) or (n, 3)")
        if not np.all(np.isfinite(verts)):
            raise ValueError("curve vertices must be finite")
        d = np.diff(verts, axis=0)
        seg = np.sqrt(np.einsum("ij,ij->i", d, d))
        del d
        if np.any(seg == 0.0):
            raise ValueError("curve has a zero-length segment")
        cum = np.empty(verts.shape[0])
        cum[0] = 0.0
        np.cumsum(seg, out=cum[1:])
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cumulative", cum)

    @classmethod
    def from_points(cls, points: Sequence) -> "PiecewiseLinearCurve":
        return cls(np.array([as_point(p) for p in points], dtype=float))

    @classmethod
    def _from_validated(cls, vertices: np.ndarray, cumulative: np.ndarray) -> "PiecewiseLinearCurve":
        """Wrap pre-validated arrays (shared views) without re-measuring."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "vertices", vertices)
        object.__setattr__(obj, "cumulative", cumulative)
        return obj

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def vertex(self, k: int) -> Point:
        return Point(*self.vertices[k])

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    def is_closed(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.vertices[0] - self.vertices[-1]) <= tol * max(1.0, self.length))


def curve_length(curve: PiecewiseLinearCurve) -> float:
    """Total arclength of the polyline."""
    return curve.length


def point_at(curve: PiecewiseLinearCurve, s: float) -> Point:
    """Point at arclength ``s`` under the unit-speed parametrization."""
    L = curve.length
    if s < -1e-12 * max(1.0, L) or s > L * (1.0 + 1e-12) + 1e-12:
        raise ValueError(f"arclength {s} outside [0, {L}]")
    s = min(max(s, 0.0), L)
    cum = curve.cumulative
    k = int(np.searchsorted(cum, s, side="right")) - 1
    k = min(max(k, 0), curve.n_vertices - 2)
    seg = cum[k + 1] - cum[k]
    theta = (s - cum[k]) / seg
    p = curve.vertices[k] * (1.0 - theta) + curve.vertices[k + 1] * theta
    return Point(float(p[0]), float(p[1]), float(p[2]))


_CHUNK = 1 << 20


def _segment_integrals(curve: PiecewiseLinearCurve, observable: Observable,
                       resolution: int) -> np.ndarray:
    """Per-segment trapezoid integrals of the observable, ``resolution`` panels each."""
    verts = curve.vertices
    seg_len = np.diff(curve.cumulative)
    n_seg = len(seg_len)
    if resolution == 1:
        vals = np.empty(curve.n_vertices)
        for lo in range(0, curve.n_vertices, _CHUNK):
            hi = min(lo + _CHUNK, curve.n_vertices)
            vals[lo:hi] = observable.evaluate_array(verts[lo:hi])
        return 0.5 * (vals[:-1] + vals[1:]) * seg_len
    theta = np.linspace(0.0, 1.0, resolution + 1)
    w = np.full(resolution + 1, 1.0 / resolution)
    w[0] *= 0.5
    w[-1] *= 0.5
    out = np.empty(n_seg)
    for lo in range(0, n_seg, _CHUNK // (resolution + 1) + 1):
        hi = min(lo + _CHUNK // (resolution + 1) + 1, n_seg)
        a = verts[lo:hi][:, None, :]
        b = verts[lo + 1:hi + 1][:, None, :]
        pts = a + (b - a) * theta[None, :, None]
        vals = observable.evaluate_array(pts.reshape(-1, 3)).reshape(hi - lo, resolution + 1)
        out[lo:hi] = (vals @ w) * seg_len[lo:hi]
    return out


def curve_running_average(curve: PiecewiseLinearCurve, observable: Observable,
                          grid: Sequence[float], resolution: int = 16):
    """Running averages (1/s) * int_0^s phi ds at the requested arclengths.

    Per-segment trapezoid quadrature with ``resolution`` sub-panels per
    segment; exact for observables that are linear along each segment.
    """
    from .running import RunningAverage

    grid = [float(s) for s in grid]
    if not grid:
        raise ValueError("empty grid")
    L = curve.length
    prev = 0.0
    for s in grid:
        if s <= prev:
            raise ValueError("grid must be strictly increasing and positive")
        if s > L * (1.0 + 1e-12):
            raise ValueError(f"grid point {s} beyond curve length {L}")
        prev = s
    seg_int = _segment_integrals(curve, observable, resolution)
    cum_int = np.empty(len(seg_int) + 1)
    cum_int[0] = 0.0
    np.cumsum(seg_int, out=cum_int[1:])
    cum = curve.cumulative
    samples = []
    for s in grid:
        s_eff = min(s, L)
        k = int(np.searchsorted(cum, s_eff, side="right")) - 1
        k = min(max(k, 0), curve.n_vertices - 2)
        total = cum_int[k]
        frac = s_eff - cum[k]
        if frac > 0.0:
            a = curve.vertices[k]
            b = curve.vertices[k + 1]
            t1 = frac / (cum[k + 1] - cum[k])
            theta = np.linspace(0.0, t1, resolution + 1)
            pts = a[None, :] + (b - a)[None, :] * theta[:, None]
            vals = observable.evaluate_array(pts)
            total += float(np.trapezoid(vals, dx=frac / resolution))
        samples.append((s, total / s))
    return RunningAverage(parameter_kind="arclength", samples=tuple(samples),
                          observable_id=observable.id)
