"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operands live in Euclidean spaces of different dimensions."""


class ParseError(ValueError):
    """Expression text could not be parsed.

    ``offset`` is the byte offset of the offending token in the input.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Evaluation left the domain of definition (log of nonpositive, etc.).

    ``subexpr`` is the printed form of the offending subexpression.
    """

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in {subexpr}")
        self.subexpr = subexpr


class NondifferentiableError(ArithmeticError):
    """A primitive (abs/min/max at a kink) is not differentiable here."""


class EmptySetError(ValueError):
    """Operation requires a non-empty set."""


class SamplingError(RuntimeError):
    """Sampling failed (e.g. rejection cap exceeded; supply a box hint)."""


class ConvergenceError(RuntimeError):
    """A numeric limit estimate did not converge; carries the trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ProblemFileError(ValueError):
    """Problem file is malformed; carries the offending key when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{message} (key: {key})")
        self.key = key
