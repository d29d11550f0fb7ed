class LabError(ValueError):
    """Invalid input: a precondition of the requested operation does not hold."""


class NumericalDefect(RuntimeError):
    """An internal invariant was violated during a computation."""


class BlockSizeTooSmall(LabError):
    """The block size N is too small for the sup-norm of the flow."""
