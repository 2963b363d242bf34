"""Interval exchange transformations: iteration, Birkhoff averages, the Keane
(infinite distinct orbit) test, Rauzy-Veech induction, and a unique-ergodicity
diagnostic."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple

import mpmath

from .errors import DegenerateStepError
from .geometry import Observable, Point
from .running import RunningAverage, integer_grid


@dataclass(frozen=True)
class IntervalExchange:
    """Piecewise translation of [0, 1) given by lengths and a permutation.

    ``permutation[i]`` is the 1-based position interval i+1 occupies after the
    exchange.  Intervals follow the half-open convention [a_i, a_{i+1}), which
    makes the map a genuine bijection of [0, 1).  ``exact_lengths`` carries
    Fraction lengths when the input was rational, enabling exact orbit
    arithmetic in the Keane test.
    """

    lengths: Tuple[float, ...]
    permutation: Tuple[int, ...]
    breakpoints: Tuple[float, ...]
    translations: Tuple[float, ...]
    exact_lengths: Optional[Tuple[Fraction, ...]] = None

    @property
    def n_intervals(self) -> int:
        return len(self.lengths)

    def __call__(self, x: float) -> float:
        return apply(self, x)


def _translations(lengths, permutation):
    n = len(lengths)
    starts = [sum(lengths[:i]) for i in range(n)]
    image_starts = []
    for i in range(n):
        before = sum(lengths[j] for j in range(n) if permutation[j] < permutation[i])
        image_starts.append(before)
    return [image_starts[i] - starts[i] for i in range(n)]


def make_iet(lengths: Sequence, permutation: Sequence[int]) -> IntervalExchange:
    """Build an interval exchange, normalizing the lengths to unit total."""
    perm = tuple(int(p) for p in permutation)
    n = len(perm)
    if n < 1 or sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"invalid permutation {permutation}")
    if len(lengths) != n:
        raise ValueError("lengths and permutation sizes differ")
    exact = all(isinstance(v, (int, Fraction)) for v in lengths)
    if exact:
        lam = [Fraction(v) for v in lengths]
        if any(v <= 0 for v in lam):
            raise ValueError("lengths must be positive")
        total = sum(lam)
        lam = [v / total for v in lam]
        lengths_f = tuple(float(v) for v in lam)
        exact_lengths = tuple(lam)
    else:
        lam = [float(v) for v in lengths]
        if any(not math.isfinite(v) or v <= 0.0 for v in lam):
            raise ValueError("lengths must be positive finite numbers")
        total = math.fsum(lam)
        lengths_f = tuple(v / total for v in lam)
        exact_lengths = None
    breaks = tuple(math.fsum(lengths_f[:i]) for i in range(1, n))
    trans = tuple(_translations(lengths_f, perm))
    return IntervalExchange(lengths=lengths_f, permutation=perm, breakpoints=breaks,
                            translations=trans, exact_lengths=exact_lengths)


def apply(E: IntervalExchange, x: float) -> float:
    """Image of x under the exchange; x must lie in [0, 1)."""
    if not 0.0 <= x < 1.0:
        raise ValueError(f"point {x} outside [0, 1)")
    i = bisect_right(E.breakpoints, x)
    y = x + E.translations[i]
    # guard against roundoff pushing the image onto 1.0
    return y if y < 1.0 else math.nextafter(1.0, 0.0)


class BirkhoffResult(RunningAverage):
    """Running Birkhoff averages over iteration counts."""


def birkhoff_average(E: IntervalExchange, x: float, observable, n_max: int,
                     grid: Optional[Sequence[int]] = None) -> BirkhoffResult:
    """Partial averages (1/n) sum phi(E^j x) on a geometric grid of n."""
    name, fn = _as_circle_fn(observable)
    if grid is None:
        grid = integer_grid(int(n_max))
    targets = sorted(set(int(g) for g in grid))
    samples = []
    total = 0.0
    y = float(x)
    k = 0
    for n in targets:
        while k < n:
            total += fn(y)
            y = apply(E, y)
            k += 1
        samples.append((float(n), total / n))
    return BirkhoffResult(parameter_kind="count", samples=tuple(samples),
                          observable_id=name)


@dataclass(frozen=True)
class KeaneResult:
    verdict: str  # passes | fails | undecided
    depth: int
    min_distance: float
    witness: Optional[Tuple[int, int, int]]  # (iterate, source breakpoint, hit breakpoint)


def keane_check(E: IntervalExchange, depth: int, tol: float = 1e-12) -> KeaneResult:
    """Test the infinite-distinct-orbit condition on the discontinuity orbits.

    Fails when a forward orbit of an interior breakpoint hits a breakpoint
    within ``depth`` iterations (within ``tol``); rational data is checked in
    exact arithmetic.  A pass is evidence, not proof, for irrational data.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = E.n_intervals
    if n == 1:
        return KeaneResult("fails", depth, 0.0, None)

    if E.exact_lengths is not None:
        lengths = E.exact_lengths
        breaks = [sum(lengths[:i], Fraction(0)) for i in range(1, n)]
        trans = _translations(lengths, E.permutation)

        def step(v):
            i = bisect_right(breaks, v)
            return v + trans[i]

        best = None
        for bi, p in enumerate(breaks):
            v = p
            for k in range(1, depth + 1):
                v = step(v)
                for bj, q in enumerate(breaks):
                    dist = abs(v - q)
                    if dist == 0:
                        return KeaneResult("fails", depth, 0.0, (k, bi + 1, bj + 1))
                    if best is None or dist < best:
                        best = dist
        return KeaneResult("passes", depth, float(best), None)

    digits = max(30, int(-math.log10(tol)) + int(math.log10(depth)) + 12)
    with mpmath.workdps(digits):
        breaks = [mpmath.mpf(0)]
        for v in E.lengths[:-1]:
            breaks.append(breaks[-1] + mpmath.mpf(v))
        breaks = breaks[1:]
        trans = [mpmath.mpf(t) for t in E.translations]

        def step(v):
            i = 0
            while i < len(breaks) and v >= breaks[i]:
                i += 1
            return v + trans[i]

        best = mpmath.mpf(2)
        witness = None
        for bi, p in enumerate(breaks):
            v = p
            for k in range(1, depth + 1):
                v = step(v)
                for bj, q in enumerate(breaks):
                    dist = abs(v - q)
                    if dist < best:
                        best = dist
                        witness = (k, bi + 1, bj + 1)
        best_f = float(best)
        if best_f < tol:
            return KeaneResult("fails", depth, best_f, witness)
        if best_f < 100.0 * tol:
            return KeaneResult("undecided", depth, best_f, witness)
        return KeaneResult("passes", depth, best_f, None)


def rauzy_step(E: IntervalExchange) -> Tuple[IntervalExchange, str]:
    """One Rauzy-Veech induction step on the two rightmost intervals.

    Compares the last interval of the domain with the interval that lands
    last in the image, induces on the interval shortened by the loser, and
    returns the renormalized exchange with the step type ('top' when the
    domain-last interval wins, 'bottom' otherwise).
    """
    n = E.n_intervals
    if n < 2:
        raise DegenerateStepError("need at least two intervals")
    perm = E.permutation
    use_exact = E.exact_lengths is not None
    lam = list(E.exact_lengths if use_exact else E.lengths)
    t = n - 1                      # index of last domain interval
    b = perm.index(n)              # index of the interval that is last in the image
    if t == b or lam[t] == lam[b]:
        raise DegenerateStepError("rightmost intervals have equal length; step undefined")

    if lam[t] > lam[b]:
        step_type = "top"
        new_lam = list(lam)
        new_lam[t] = lam[t] - lam[b]
        p_t = perm[t]
        new_perm = []
        for i in range(n):
            if i == b:
                new_perm.append(p_t + 1)
            elif perm[i] <= p_t:
                new_perm.append(perm[i])
            else:
                new_perm.append(perm[i] + 1 if perm[i] <= n - 1 else perm[i])
        induced = make_iet(new_lam, new_perm)
    else:
        step_type = "bottom"
        adj = list(lam)
        adj[b] = lam[b] - lam[t]
        order = list(range(b + 1)) + [t] + list(range(b + 1, t))
        new_lam = [adj[i] for i in order]
        new_perm = [perm[i] for i in order]
        induced = make_iet(new_lam, new_perm)
    return induced, step_type


@dataclass(frozen=True)
class ErgodicityReport:
    spread: float
    per_observable: dict      # name -> {start: final average}
    consistent: bool
    threshold: float
    n: int


def unique_ergodicity_diagnostic(E: IntervalExchange, observables: Sequence, starts: Sequence[float],
                                 n: int, threshold: float = 1e-2) -> ErgodicityReport:
    """Compare Birkhoff averages across starts; a small spread across starts is
    the numeric signature of a unique invariant measure."""
    starts = [float(s) for s in starts]
    if len(starts) < 2:
        raise ValueError("need at least 2 starts")
    obs = [(name, fn) for name, fn in map(_as_circle_fn, observables)]
    if not obs:
        raise ValueError("need at least 1 observable")
    per = {name: {} for name, _ in obs}
    spread = 0.0
    for name, fn in obs:
        finals = []
        for x in starts:
            res = birkhoff_average(E, x, (name, fn), n, grid=[n])
            finals.append(res.final[1])
            per[name][x] = res.final[1]
        spread = max(spread, max(finals) - min(finals))
    return ErgodicityReport(spread=spread, per_observable=per,
                            consistent=spread < threshold, threshold=threshold, n=int(n))


def _as_circle_fn(obs) -> Tuple[str, Callable[[float], float]]:
    """Adapt an Observable, a bare callable, or a (name, callable) pair to [0,1] -> R."""
    if isinstance(obs, Observable):
        return obs.id, lambda t, _o=obs: _o.fn(Point(t, 0.0, 0.0))
    if isinstance(obs, tuple) and len(obs) == 2 and callable(obs[1]):
        return str(obs[0]), obs[1]
    if callable(obs):
        return getattr(obs, "__name__", "phi"), obs
    raise TypeError(f"cannot interpret observable {obs!r}")
