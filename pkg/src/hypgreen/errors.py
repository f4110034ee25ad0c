class HypGreenError(Exception):
    pass


class InputError(HypGreenError, ValueError):
    """Invalid arguments: unknown vertices, bad shapes, violated preconditions."""


class NotCoerciveError(HypGreenError):
    """The restricted operator is not positive definite."""

    def __init__(self, message, lambda1=None):
        super().__init__(message)
        self.lambda1 = lambda1


class ConvergenceError(HypGreenError):
    """An iterative method ran out of iterations."""

    def __init__(self, message, iterate=None, history=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = history


class ConstructionError(HypGreenError):
    pass
