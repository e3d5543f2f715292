"""Exceptions and warning categories used across dynnet."""


class DynnetError(Exception):
    """Base class for all dynnet errors."""


class SchurConvergenceError(DynnetError):
    """QR iteration for the real Schur form failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class InseparableBlocksError(DynnetError):
    """Two adjacent Schur blocks with (numerically) identical eigenvalues
    cannot be swapped."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class SpectraNotSeparatedError(DynnetError):
    """Sylvester solve rejected: coefficient spectra overlap within the
    separation tolerance."""

    def __init__(self, message, gap=None, block_pair=None):
        super().__init__(message)
        self.gap = gap
        self.block_pair = block_pair


class ForcedSplitError(DynnetError):
    """The requested cluster count would force repeated eigenvalues into
    distinct clusters."""

    def __init__(self, message, n_distinct=None):
        super().__init__(message)
        self.n_distinct = n_distinct


class UnreducedBlockError(DynnetError):
    """A 2x2 diagonal Schur block turned out to have two real eigenvalues."""


class GMembershipError(DynnetError):
    """A diagonal block violates the sparse-block membership conditions
    (e.g. a 2x2 sub-block with zero upper-right entry)."""

    def __init__(self, message, block_index=None):
        super().__init__(message)
        self.block_index = block_index


class DegenerateNeuronError(DynnetError):
    """A first-order neuron with zero damping coefficient has no ODE."""


class MatrixExponentialOverflowError(DynnetError):
    """exp(scale*m) overflowed."""

    def __init__(self, message, norm=None):
        super().__init__(message)
        self.norm = norm


class IntegrationError(DynnetError):
    """Adaptive integration failed (step-size underflow or step budget)."""

    def __init__(self, message, t=None, layer=None, neuron=None):
        super().__init__(message)
        self.t = t
        self.layer = layer
        self.neuron = neuron


class ConditionNumberWarning(UserWarning):
    """The transformation matrix exceeded the user-supplied condition cap."""


class NumericallySingularWarning(UserWarning):
    """A matrix was numerically singular; a sentinel value was returned."""


class PiecewiseConstantInputWarning(UserWarning):
    """Piecewise-constant interpolation drops the jump-impulse correction."""
