"""Exception hierarchy shared by every stage of the pipeline.

Each class carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""


class MinRegError(Exception):
    exit_code = 1


class MalformedInput(MinRegError):
    exit_code = 2


class DegenerateInput(MinRegError):
    exit_code = 3


class ParallelReactions(DegenerateInput):
    pass


class DegenerateSlope(DegenerateInput):
    pass


class NonPositivePoint(MinRegError, ValueError):
    exit_code = 3


class ScheduleOutOfBox(DegenerateInput):
    pass


class EpsilonTooLarge(MinRegError):
    exit_code = 4


class WrongCase(MinRegError):
    exit_code = 3


class ConstructionError(MinRegError):
    exit_code = 5


class TrajectoryEscaped(ConstructionError):
    pass


class NonIntersectingTrajectories(ConstructionError):
    pass


class RegionInvalid(ConstructionError):
    pass


class IntegrationError(MinRegError):
    exit_code = 5


class StepUnderflow(IntegrationError):
    pass


class NonPositiveExcursion(IntegrationError):
    pass


class TargetOutsideRegion(MinRegError):
    exit_code = 1


class BudgetExceeded(MinRegError):
    exit_code = 1


class EqualEigenvalues(MinRegError):
    exit_code = 1
