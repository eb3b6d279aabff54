class QNeuronError(Exception):
    """Base class for errors raised by this package."""


class NotConvergedError(QNeuronError):
    """A trajectory or training run never met its stopping criterion."""


class NumericalError(QNeuronError):
    """A solver produced an unusable result (degenerate null space, lost positivity, ...)."""


class DivergenceError(NumericalError):
    """Gradient descent kept increasing the cost."""
