"""Exception hierarchy shared by all modules."""


class StrongWeakError(Exception):
    """Base class for every error raised by the package."""


class GridError(StrongWeakError, ValueError):
    """Invalid grid construction or grid-dependent argument."""


class GridMismatch(GridError):
    pass


class ContainmentError(StrongWeakError, ValueError):
    """Initial packet tails would touch the (periodic) grid edges."""


class DimensionMismatch(StrongWeakError, ValueError):
    pass


class OrthogonalSelection(StrongWeakError, ValueError):
    """Pre- and post-selected states are (numerically) orthogonal."""


class NodeError(StrongWeakError, ValueError):
    """Post-selected position sits on (or near) a node of the wavefunction."""


class NodeInInterval(NodeError):
    pass


class NodeApproach(NodeError):
    """A Bohmian trajectory entered a masked low-density region."""


class BoundaryLeak(StrongWeakError, RuntimeError):
    """Probability reached the grid edges during propagation."""

    def __init__(self, message, time=None, edge_probability=None):
        super().__init__(message)
        self.time = time
        self.edge_probability = edge_probability


class OpenTail(StrongWeakError, ValueError):
    """Time record ends before the detector signal has decayed."""


class EmptyBin(StrongWeakError, ValueError):
    pass


class DegenerateAngle(StrongWeakError, ValueError):
    """Interferometer coupling angle at which cot(alpha/2) or sin(alpha) vanish."""


class ConfigError(StrongWeakError, ValueError):
    pass


class ScenarioError(StrongWeakError, RuntimeError):
    """A module error raised while executing a CLI scenario."""

    def __init__(self, message, location=None, cause=None):
        super().__init__(message)
        self.location = location
        self.cause = cause
