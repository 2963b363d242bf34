"""leafavg: leafwise length averages vs Birkhoff time averages, numerically.

Flow-generated one-dimensional foliations (plane, torus, competition simplex),
Poincare return maps, interval exchange transformations, and fractal-leaf
constructions, with running-average accumulators and convergence verdicts.
All public values are immutable; operations are pure functions of their
inputs and safe to run concurrently.
"""

from .averages import (ConvergenceReport, ReportPolicy, RunningAverage,
                       circuit_limit_predictor, convergence_report,
                       length_average_forward, length_average_leaf, time_average)
from .constructions import (BandFunction, CircleMap, KochLeaf, SuspensionSystem,
                            band_running_average, koch_curve, koch_leaf,
                            make_circle_map, suspension_length_average)
from .errors import (DegenerateStepError, EquilibriumStartError, LeafavgError,
                     NoReturnError, NumericsError, OrbitHitsEquilibriumError,
                     ScenarioError, SectionGrazeError)
from .flows import (ArcTrajectory, Equilibrium, Orbit, VectorField,
                    classify_equilibrium, integrate_arclength, integrate_time,
                    make_field)
from .geometry import (OBSERVABLES, Observable, PiecewiseLinearCurve, Point,
                       curve_length, curve_running_average, get_observable,
                       point_at, register_observable)
from .iet import (BirkhoffResult, ErgodicityReport, IntervalExchange, KeaneResult,
                  birkhoff_average, keane_check, make_iet, rauzy_step,
                  unique_ergodicity_diagnostic)
from .iet import apply as iet_apply
from .sections import (CrossSection, OmegaHorizons, OmegaVerdict, ReturnRecord,
                       classify_omega_limit, first_return, return_sequence)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
