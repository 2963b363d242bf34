"""Fractal-leaf and suspension constructions with exact one-dimensional oracles.

The leaf assembles unit-arclength Koch blocks of shrinking extent joined by
short straight connectors; a base-b band rule attaches a sign to each block.
The attached observable is constant across each block and ramps only along
the straight connectors, so its arc integrals have closed forms, giving an
oracle the curve machinery must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .geometry import Observable, PiecewiseLinearCurve
from .running import RunningAverage, integer_grid

_ROT60 = (0.5, math.sqrt(3.0) / 2.0)  # cos 60, sin 60


def _koch_refine(verts: np.ndarray) -> np.ndarray:
    """One generator pass: each segment becomes the 4-segment Koch motif."""
    c, s = _ROT60
    p0 = verts[:-1]
    p1 = verts[1:]
    d = (p1 - p0) / 3.0
    a = p0 + d
    rot = np.empty_like(d)
    rot[:, 0] = c * d[:, 0] - s * d[:, 1]
    rot[:, 1] = s * d[:, 0] + c * d[:, 1]
    n = len(p0)
    out = np.empty((4 * n + 1, 2))
    out[0:-1:4] = p0
    out[1::4] = a
    out[2::4] = a + rot
    out[3::4] = p0 + 2.0 * d
    out[-1] = verts[-1]
    return out


def _koch_vertices(level: int) -> np.ndarray:
    verts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for _ in range(level):
        verts = _koch_refine(verts)
    return verts


def koch_curve(level: int) -> PiecewiseLinearCurve:
    """Koch curve of the given level on the unit base [(0,0), (1,0)].

    4^level segments; arclength (4/3)^level.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    return PiecewiseLinearCurve(_koch_vertices(level))


@dataclass(frozen=True)
class BandFunction:
    """Base-b banded sign rule on block indices.

    Block n carries +1 strictly between b^(2m-1)+1 and b^(2m)-1, -1 strictly
    between b^(2m)+1 and b^(2m+1)-1, and 0 on the buffer blocks around the
    powers.  ``block_length`` is the arclength charged per block.
    """

    base: int
    block_length: float = 1.0

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("base must be >= 2")

    def value(self, n: int) -> int:
        if n < 1:
            raise ValueError("block index starts at 1")
        b = self.base
        p, power = 0, 1
        while power * b <= n:
            power *= b
            p += 1
        # n in [b^p, b^(p+1))
        if p >= 1 and power + 1 < n < power * b - 1:
            return 1 if p % 2 == 1 else -1
        return 0

    def values(self, n_blocks: int) -> np.ndarray:
        return np.array([self.value(n) for n in range(1, n_blocks + 1)], dtype=float)


def band_running_average(band: BandFunction, n_blocks: int,
                         grid: Optional[Sequence[int]] = None) -> RunningAverage:
    """Running average of the band values by exact signed block sums.

    Samples sit on the geometric count grid plus the powers of the base, so
    the extremes of the oscillation are always sampled.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if grid is None:
        powers = []
        p = band.base
        while p <= n_blocks:
            powers.append(p)
            p *= band.base
        grid = integer_grid(n_blocks, extra=tuple(powers))
    vals = band.values(n_blocks)
    cums = np.cumsum(vals)
    samples = tuple((float(n) * band.block_length, float(cums[n - 1]) / n)
                    for n in sorted(set(int(g) for g in grid)) if 1 <= n <= n_blocks)
    return RunningAverage(parameter_kind="count", samples=samples,
                          observable_id=f"band_base_{band.base}")


@dataclass(frozen=True)
class KochLeaf:
    """Assembled leaf: scaled Koch blocks joined by straight connectors.

    Block n is the level-n Koch curve scaled to unit arclength (isotropic
    factor ~(3/4)^n, the bounding square side), laid left to right with a gap
    of ``gap_fraction`` of the block width carrying the observable ramp.
    """

    blocks: Tuple[PiecewiseLinearCurve, ...]
    curve: PiecewiseLinearCurve
    block_spans: Tuple[Tuple[float, float], ...]   # x extents of each block
    block_end_indices: Tuple[int, ...]             # vertex index of each block end
    gaps: Tuple[float, ...]                        # connector lengths, len n_blocks-1
    band: BandFunction

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_boundaries(self) -> list[float]:
        """Measured leaf arclength at the end of each block."""
        return [float(self.curve.cumulative[i]) for i in self.block_end_indices]

    def oracle_running_average(self) -> list[Tuple[float, float]]:
        """Closed-form running averages at block ends, connector ramps included."""
        vals = [self.band.value(n) for n in range(1, self.n_blocks + 1)]
        out = []
        integral = 0.0
        s = 0.0
        for k in range(self.n_blocks):
            integral += vals[k]
            s += 1.0
            out.append((s, integral / s))
            if k < len(self.gaps):
                g = self.gaps[k]
                integral += 0.5 * g * (vals[k] + vals[k + 1])
                s += g
        return out


def koch_leaf(n_blocks: int, base: int = 3, gap_fraction: float = 0.004,
              max_level: Optional[int] = None) -> Tuple[KochLeaf, Observable]:
    """Build the leaf and its matched band observable.

    The observable depends on the x coordinate only: the block value on each
    block's x extent, interpolated linearly across the gaps, and 0 outside,
    so it is continuous on the plane.  ``max_level`` caps the represented
    Koch level per block (arclength stays exactly 1), for memory control at
    large block counts.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    band = BandFunction(base=base)
    levels = [n if max_level is None else min(n, max_level) for n in range(1, n_blocks + 1)]
    counts = [4 ** lv + 1 for lv in levels]
    all_verts = np.zeros((sum(counts), 3))

    spans = []
    gaps = []
    end_indices = []
    slices = []
    x_off = 0.0
    pos = 0
    gen = np.array([[0.0, 0.0], [1.0, 0.0]])
    gen_level = 0
    for n in range(1, n_blocks + 1):
        level = levels[n - 1]
        while gen_level < level:
            gen = _koch_refine(gen)
            gen_level += 1
        scale = 0.75 ** level  # unit arclength: level has length (4/3)^level
        m = counts[n - 1]
        all_verts[pos:pos + m, 0] = gen[:, 0] * scale + x_off
        all_verts[pos:pos + m, 1] = gen[:, 1] * scale
        spans.append((x_off, float(all_verts[pos + m - 1, 0])))
        slices.append((pos, pos + m))
        pos += m
        end_indices.append(pos - 1)
        x_off = spans[-1][1]
        if n < n_blocks:
            gap = gap_fraction * (spans[-1][1] - spans[-1][0])
            gaps.append(gap)
            x_off += gap
    curve = PiecewiseLinearCurve(all_verts)
    cum = curve.cumulative
    blocks = tuple(
        PiecewiseLinearCurve._from_validated(curve.vertices[i0:i1], cum[i0:i1] - cum[i0])
        for i0, i1 in slices)
    leaf = KochLeaf(blocks=blocks, curve=curve, block_spans=tuple(spans),
                    block_end_indices=tuple(end_indices), gaps=tuple(gaps), band=band)

    knots_x = []
    knots_v = []
    for k, (x0, x1) in enumerate(spans):
        v = float(band.value(k + 1))
        knots_x.extend([x0, x1])
        knots_v.extend([v, v])
    knots_x = np.array(knots_x)
    knots_v = np.array(knots_v)

    def fn(p):
        return float(np.interp(p.x, knots_x, knots_v))

    def array_fn(coords):
        return np.interp(coords[:, 0], knots_x, knots_v)

    obs = Observable(id=f"koch_band_base_{base}", fn=fn,
                     description="block sign by x position, linear ramps on connectors",
                     array_fn=array_fn)
    return leaf, obs


@dataclass(frozen=True)
class CircleMap:
    """Circle map with a usable inverse branch."""

    name: str
    parameters: dict
    forward: Callable[[float], float]
    inverse: Callable[[float], float]
    attracting_fixed_point: Optional[float] = None
    repelling_fixed_point: Optional[float] = None


def make_circle_map(name: str, parameters: Optional[dict] = None) -> CircleMap:
    params = dict(parameters or {})
    if name == "rotation":
        rho = float(params["rho"])

        def fwd(t, _r=rho):
            return (t + _r) % 1.0

        def inv(t, _r=rho):
            return (t - _r) % 1.0

        return CircleMap("rotation", {"rho": rho}, fwd, inv)
    if name == "north_south":
        kappa = float(params["kappa"])
        if kappa <= 0.0:
            raise ValueError("kappa must be positive")

        def fwd(t, _k=kappa):
            return (t - _k * math.sin(2.0 * math.pi * t)) % 1.0

        # monotone branch around the repelling point 1/2; backward orbits live there
        twopik = 2.0 * math.pi * kappa
        if twopik <= 1.0:
            lo, hi = 0.0, 1.0
        else:
            edge = math.acos(1.0 / twopik) / (2.0 * math.pi)
            lo, hi = edge, 1.0 - edge
        f_lo = lo - kappa * math.sin(2.0 * math.pi * lo)
        f_hi = hi - kappa * math.sin(2.0 * math.pi * hi)
        if f_lo > 0.0 or f_hi < 1.0:
            raise ValueError(f"north_south kappa={kappa} has no inverse branch covering the circle")

        def inv(t, _k=kappa, _lo=lo, _hi=hi):
            t = t % 1.0
            a, b = _lo, _hi
            for _ in range(64):
                mid = 0.5 * (a + b)
                if mid - _k * math.sin(2.0 * math.pi * mid) < t:
                    a = mid
                else:
                    b = mid
                if b - a < 1e-14:
                    break
            return 0.5 * (a + b)

        return CircleMap("north_south", {"kappa": kappa}, fwd, inv,
                         attracting_fixed_point=0.0, repelling_fixed_point=0.5)
    raise KeyError(f"unknown circle map {name!r}")


@dataclass(frozen=True)
class SuspensionSystem:
    """Unit-height suspension of a circle map with a fiber observable."""

    circle_map: CircleMap
    fiber_observable: Tuple[str, Callable[[float], float]]
    source: Optional[float] = None


def suspension_length_average(system: SuspensionSystem, x: float, n_max: int) -> RunningAverage:
    """Two-sided leaf averages of the suspension at integer depths.

    At depth n the leaf ball covers n forward and n backward unit fibers, so
    the average is (forward Birkhoff sum + backward Birkhoff sum) / (2n).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    name, phi = system.fiber_observable
    P, Pinv = system.circle_map.forward, system.circle_map.inverse
    targets = integer_grid(int(n_max))
    fwd_sum = 0.0
    bwd_sum = 0.0
    yf = float(x) % 1.0
    yb = float(x) % 1.0
    samples = []
    k = 0
    for n in targets:
        while k < n:
            fwd_sum += phi(yf)
            yf = P(yf)
            yb = Pinv(yb)
            bwd_sum += phi(yb)
            k += 1
        samples.append((float(n), (fwd_sum + bwd_sum) / (2.0 * n)))
    return RunningAverage(parameter_kind="count", samples=tuple(samples),
                          observable_id=name)
