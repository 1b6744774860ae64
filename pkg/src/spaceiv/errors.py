"""Exception hierarchy shared by all modules."""


class SpaceIVError(ValueError):
    """Base class for all errors raised by this package."""


class SingularStructure(SpaceIVError):
    """``Id - B`` (or its extended counterpart) is numerically singular."""


class InvalidSampleSize(SpaceIVError):
    """The sample size does not exceed the number of instruments."""


class CyclicGraph(SpaceIVError):
    """The predictor subgraph contains a directed cycle."""


class DegenerateResidual(SpaceIVError):
    """The residual lies (numerically) in the column space of the instruments."""


class RankDeficientInstruments(SpaceIVError):
    """``I^T I`` is singular."""


class EigenFailure(SpaceIVError):
    """The LIML generalized eigenproblem could not be solved."""


class NormalizationFailure(SpaceIVError):
    """The minimizing eigenvector has a vanishing response coefficient."""


class RankDeficientFirstStage(SpaceIVError):
    """``X_S^T P_I X_S`` is singular."""


class RankDeficientDesign(SpaceIVError):
    """``X_S^T X_S`` is singular."""


class SizeGuard(SpaceIVError):
    """A subset enumeration would exceed the configured budget."""
