"""Exception types shared across the package."""


class MedaggError(Exception):
    """Base class for all errors raised by this package."""


# ---- data validation ----

class DimensionMismatch(MedaggError):
    pass


class NonFiniteEntry(MedaggError):
    pass


class ZeroVarianceColumn(MedaggError):
    pass


class RankDeficientCovariates(MedaggError):
    pass


# ---- profiling / objective ----

class ZeroAggregate(MedaggError):
    """Xa or Mb is numerically the zero vector."""


class CollinearAggregates(MedaggError):
    """1 - alpha^2 fell below the admissibility floor delta."""


class TauBelowFloor(MedaggError):
    """|tau| fell below the admissibility floor r0."""


# ---- solver ----

class SingularBlockSystem(MedaggError):
    pass


class NoAdmissibleSolution(MedaggError):
    """Every restart chain ended outside the admissible region or failed the curvature screen."""


class NonDescentDetected(MedaggError):
    """A block/prox sweep increased the augmented Lagrangian; indicates an implementation bug."""


# ---- tuning ----

class InvalidFoldCount(MedaggError):
    pass


class AllCellsFailed(MedaggError):
    pass


# ---- simulation ----

class InvalidRho(MedaggError):
    pass


class NotPositiveDefinite(MedaggError):
    pass


class DegenerateRegime(MedaggError):
    pass


# ---- metrics ----

class EmptyInput(MedaggError):
    pass


# ---- oracle ----

class InfeasibleEverywhere(MedaggError):
    pass


class NonFiniteEvaluation(MedaggError):
    pass


class RankOneViolation(MedaggError):
    pass


class DegenerateTau(MedaggError):
    pass


# ---- io / cli ----

class ParseError(MedaggError):
    pass


class RaggedRows(MedaggError):
    pass


class ConfigError(MedaggError):
    pass
