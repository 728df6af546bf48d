"""Exception types shared across the package.

Every numerical failure raises a subclass of :class:`NumericsError`, so the
CLI can map them to a single exit code. Configuration problems raise
:class:`ConfigError` instead.
"""


class NumericsError(Exception):
    """Base class for numerical failures (singularity, divergence, ...)."""


class ConfigError(Exception):
    """Invalid experiment configuration."""


class QuadratureUnderresolved(NumericsError):
    """Doubling the quadrature grid moved a matrix entry by more than the tolerance."""


class AlreadyWeighted(NumericsError):
    """Fejer row weighting applied twice."""


class PerturbationLeavesClass(NumericsError):
    """A generated perturbation failed validation against the map-class bounds."""


class NotComplementary(NumericsError):
    """Two subspaces expected to be complementary are numerically degenerate."""


class NotTransverse(NumericsError):
    """A subspace is numerically tangent to the chart's kernel frame."""


class TransformSingular(NumericsError):
    """The invertibility precondition of a graph transform failed."""


class RankCollapse(NumericsError):
    """An iterated image lost numerical rank."""


class NoContraction(NumericsError):
    """A fixed-point iteration expanded for several consecutive steps."""


class DegenerateCocycle(NumericsError):
    """NaN or zero growth encountered while accumulating a cocycle product."""


class DegenerateBlock(NumericsError):
    """A volume-growth factor vanished on a sampled block."""


class FrameMismatch(NumericsError):
    """A chart or subspace was used against a frame it was not built on."""
