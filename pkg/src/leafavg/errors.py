"""Exception hierarchy shared across the package."""


class LeafavgError(Exception):
    """Base class for all package errors."""


class ScenarioError(LeafavgError):
    """Malformed scenario file or bad catalog reference."""


class NumericsError(LeafavgError):
    """A computation could not be carried out numerically."""


class EquilibriumStartError(NumericsError):
    """Trajectory operation started at (or too close to) an equilibrium."""


class NoReturnError(NumericsError):
    """Orbit did not recross the section within the configured horizon."""

    def __init__(self, message, index=0):
        super().__init__(message)
        self.index = index


class OrbitHitsEquilibriumError(NumericsError):
    """Orbit approached an equilibrium before recrossing the section."""

    def __init__(self, message, index=0):
        super().__init__(message)
        self.index = index


class SectionGrazeError(NumericsError):
    """Crossing landed within tolerance of a section endpoint."""


class DegenerateStepError(NumericsError):
    """Renormalization step refused because the compared lengths are equal."""
