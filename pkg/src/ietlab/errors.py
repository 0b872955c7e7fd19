"""Exception types raised across the package.

Every exception carries enough context (field names, step indices) for the
CLI to turn it into a validation message or a partial report.
"""


class IETLabError(Exception):
    """Base class for all package errors."""


class ValidationError(IETLabError, ValueError):
    """Bad user input.  ``field`` names the offending field path."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ReduciblePermutation(ValidationError):
    def __init__(self, k, field="perm"):
        super().__init__(f"permutation preserves {{1..{k}}}", field)
        self.k = k


class NonPositiveLength(ValidationError):
    def __init__(self, index, field="lengths"):
        super().__init__(f"length #{index + 1} is not positive", field)
        self.index = index


class EndpointHit(IETLabError):
    """An orbit point landed on a discontinuity (within tolerance)."""

    def __init__(self, step, index, point=None):
        super().__init__(f"orbit hit endpoint beta_{index} at step {step}")
        self.step = step
        self.index = index
        self.point = point


class ReturnTimeExceeded(IETLabError):
    def __init__(self, max_steps):
        super().__init__(f"first return not reached within {max_steps} steps")
        self.max_steps = max_steps


class UndefinedStep(IETLabError):
    """Rauzy-Veech step with equal competing lengths (a connection)."""

    def __init__(self, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__("Rauzy-Veech step undefined: competing lengths are equal" + where)
        self.step = step


class NonComposablePath(ValidationError):
    def __init__(self, position):
        super().__init__(f"arrow #{position} does not start where the previous one ends", "path")
        self.position = position


class ZeroColumn(ValidationError):
    def __init__(self, column):
        super().__init__(f"column {column} sums to zero", "matrix")
        self.column = column


class SearchBudgetExceeded(IETLabError):
    """Raised with the partial result attached as ``partial``."""

    def __init__(self, budget, partial=None):
        super().__init__(f"search budget of {budget} nodes exhausted")
        self.budget = budget
        self.partial = partial


class ConeViolation(ValidationError):
    def __init__(self, k):
        super().__init__(f"tau violates the cone inequality at k={k}", "tau")
        self.k = k


class DegenerateProduct(IETLabError):
    pass


class AsymmetricCoefficients(ValidationError):
    def __init__(self, plus, minus):
        super().__init__(f"sum C+ = {plus} differs from sum C- = {minus}", "c_plus")


class NonPositiveRoof(ValidationError):
    def __init__(self, value, where):
        super().__init__(f"roof takes value {value} <= 0 near x={where}", "g")


class AtSingularity(IETLabError):
    def __init__(self, x, index):
        super().__init__(f"x={x} coincides with singularity beta_{index}")
        self.x = x
        self.index = index


class StepBudgetExceeded(IETLabError):
    def __init__(self, budget, partial=None):
        super().__init__(f"step budget of {budget} base iterations exhausted")
        self.budget = budget
        self.partial = partial


class DegenerateShrink(IETLabError):
    pass


class DepthExceeded(IETLabError):
    def __init__(self, max_height, needed, partial=None, message=None):
        super().__init__(message or f"max height {max_height} at max depth is below window start {needed}")
        self.partial = partial


class InsufficientTail(IETLabError):
    pass


class NoDominantTower(IETLabError):
    pass
