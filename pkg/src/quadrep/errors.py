class QuadrepError(Exception):
    """Base class for all library errors."""


class DimensionError(QuadrepError):
    pass


class SingularFormError(QuadrepError):
    pass


class BudgetExceeded(QuadrepError):
    """A computation would exceed its configured work budget."""


class QuadratureError(QuadrepError):
    """Adaptive quadrature did not reach its tolerance."""


class StabilizationError(QuadrepError):
    def __init__(self, p, k, last_two):
        super().__init__(f"local density at p={p} not stabilized by k={k}: last values {last_two}")
        self.p = p
        self.k = k
        self.last_two = last_two
