"""Exception types raised across the package."""


class NbtspError(Exception):
    """Base class for all package errors."""


class DomainError(NbtspError, ValueError):
    """An argument lies outside the domain of the operation."""


class LjfOverflowError(NbtspError, OverflowError):
    def __init__(self, r, message=None):
        self.r = r
        super().__init__(message or f"force evaluation overflowed at r={r!r}")


class InvalidShapeError(DomainError):
    pass


class UnsupportedExponentError(DomainError):
    pass


class InfeasibleTargetError(DomainError):
    pass


class ConvergenceError(NbtspError, ArithmeticError):
    def __init__(self, message, bracket=None):
        self.bracket = bracket
        if bracket is not None:
            message = f"{message} (last bracket {bracket[0]!r}..{bracket[1]!r})"
        super().__init__(message)


class ParseError(NbtspError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(NbtspError, ValueError):
    pass


class SizeLimitError(NbtspError, ValueError):
    pass


class SingularityError(NbtspError, ArithmeticError):
    def __init__(self, i, j, distance):
        self.pair = (i, j)
        self.distance = distance
        super().__init__(f"particles {i} and {j} coincide (distance {distance:.3g})")


class NumericalBlowupError(NbtspError, ArithmeticError):
    def __init__(self, step, max_force):
        self.step = step
        self.max_force = max_force
        super().__init__(
            f"non-finite particle state at step {step} (max force magnitude {max_force:.6g})"
        )


class DegenerateAngleError(NbtspError, ValueError):
    pass
