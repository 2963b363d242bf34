"""Running-average series, sampling grids, and convergence verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

GRID_RATIO = 2.0 ** 0.25  # geometric sampling grid, dyadic every 4 samples


def geometric_grid(limit: float, start: float = 1.0) -> list[float]:
    """Geometric grid start * ratio^k up to and including ~limit."""
    if limit < start:
        return [limit]
    n = int(math.floor(4.0 * math.log2(limit / start) + 1e-9))
    grid = [start * 2.0 ** (k / 4.0) for k in range(n + 1)]
    if grid[-1] < limit * (1.0 - 1e-12):
        grid.append(limit)
    return grid


def integer_grid(limit: int, extra: Tuple[int, ...] = ()) -> list[int]:
    """Strictly increasing integer grid following the geometric spacing."""
    vals = set(int(round(v)) for v in geometric_grid(float(limit)))
    vals.update(int(e) for e in extra if 1 <= e <= limit)
    vals.add(limit)
    return sorted(v for v in vals if 1 <= v <= limit)


@dataclass(frozen=True)
class RunningAverage:
    """Partial averages of one observable along one trajectory/curve/orbit.

    parameter_kind is 'time', 'arclength', or 'count'; samples are
    (parameter, partial_average) with strictly increasing parameters.
    """

    parameter_kind: str
    samples: Tuple[Tuple[float, float], ...]
    observable_id: str
    termination: str = "complete"

    def __post_init__(self):
        prev = 0.0
        for p, _ in self.samples:
            if p <= prev:
                raise ValueError("sample parameters must be strictly increasing and positive")
            prev = p

    @property
    def final(self) -> Tuple[float, float]:
        return self.samples[-1]

    def values(self):
        return [a for _, a in self.samples]

    def parameters(self):
        return [p for p, _ in self.samples]


@dataclass(frozen=True)
class ReportPolicy:
    """Thresholds for the numeric converged/diverged/undecided judgment.

    ``tail_fraction`` is the trailing fraction of the sample list over which
    limsup_hat/liminf_hat are taken; on the geometric grid the default quarter
    still spans several dyadic windows of the parameter.
    """

    tolerance: float = 1e-2
    divergence_factor: float = 10.0
    min_samples: int = 8
    min_window_span: int = 3  # required dyadic windows between first and last parameter
    tail_fraction: float = 0.25

    @property
    def divergence_floor(self) -> float:
        return self.tolerance * self.divergence_factor

    def describe(self) -> str:
        return (f"tail=last_{self.tail_fraction:g}_of_samples;windows=dyadic;"
                f"tol={self.tolerance:g};floor={self.divergence_floor:g}")


@dataclass(frozen=True)
class ConvergenceReport:
    verdict: str  # converged | diverged | undecided
    estimate: Optional[float]
    limsup_hat: float
    liminf_hat: float
    window_policy: str

    @property
    def gap(self) -> float:
        return self.limsup_hat - self.liminf_hat


def convergence_report(avg: RunningAverage, policy: ReportPolicy | None = None) -> ConvergenceReport:
    """Judge whether the partial averages settled, using dyadic tail windows.

    limsup_hat/liminf_hat are taken over the trailing fraction of the sample
    list (a wide parameter span on the geometric grid).  Converged needs that
    gap and the drift between the last two dyadic parameter windows to stay
    within tolerance; diverged needs the gap to persist above the divergence
    floor across two consecutive double windows.
    """
    policy = policy or ReportPolicy()
    samples = avg.samples
    if len(samples) < policy.min_samples:
        raise ValueError(f"too few samples ({len(samples)} < {policy.min_samples})")
    p_max = samples[-1][0]
    p_min = samples[0][0]
    if p_max <= 0 or p_max / max(p_min, 1e-300) < 2.0 ** policy.min_window_span:
        raise ValueError("samples span fewer than the required dyadic windows")

    n_tail = max(2, int(math.ceil(len(samples) * policy.tail_fraction)))
    tail = samples[len(samples) - n_tail:]
    tail_vals = [a for _, a in tail]
    limsup_hat = max(tail_vals)
    liminf_hat = min(tail_vals)
    gap = limsup_hat - liminf_hat

    def window_vals(j):
        lo, hi = p_max / 2.0 ** (j + 1), p_max / 2.0 ** j
        return [a for p, a in samples if lo < p <= hi]

    w0, w1, w2 = window_vals(0), window_vals(1), window_vals(2)
    drift = abs(_mean(w0) - _mean(w1)) if (w0 and w1) else math.inf

    converged = gap <= policy.tolerance and drift <= policy.tolerance
    d01 = w0 + w1
    d12 = w1 + w2
    diverged = (len(d01) >= 2 and len(d12) >= 2
                and max(d01) - min(d01) >= policy.divergence_floor
                and max(d12) - min(d12) >= policy.divergence_floor)

    if converged:
        verdict = "converged"
        estimate = 0.5 * (limsup_hat + liminf_hat)
    elif diverged:
        verdict, estimate = "diverged", None
    else:
        verdict, estimate = "undecided", None
    return ConvergenceReport(verdict=verdict, estimate=estimate, limsup_hat=limsup_hat,
                             liminf_hat=liminf_hat, window_policy=policy.describe())


def _mean(vals):
    return sum(vals) / len(vals)
