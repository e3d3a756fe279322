"""Exception types shared across the package."""


class AlexandrovError(Exception):
    pass


class BoundaryNode(AlexandrovError, ValueError):
    """A boundary-flagged node was used where an interior node is required."""


class InvalidNodeSet(AlexandrovError, ValueError):
    pass


class NotConverged(AlexandrovError, RuntimeError):
    def __init__(self, report, message=None):
        self.report = report
        super().__init__(message or f"solver did not converge: {report}")


class InfeasibleDomain(AlexandrovError, ValueError):
    pass


class HypothesisViolated(AlexandrovError, ValueError):
    pass


class PreconditionFailed(AlexandrovError, ValueError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class TooCoarse(AlexandrovError, ValueError):
    pass


class CFLViolation(AlexandrovError, ValueError):
    pass


class PoissonNotConverged(AlexandrovError, RuntimeError):
    pass
