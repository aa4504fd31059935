"""Exception types raised by the analysis routines."""


class IsacLabError(Exception):
    """Base class for all package errors."""


class ConfigError(IsacLabError, ValueError):
    """Invalid scenario configuration or CLI input."""


class DegenerateChannel(IsacLabError, ArithmeticError):
    """User channel numerically parallel to the target steering vector."""


class DegenerateSteering(IsacLabError, ArithmeticError):
    """Steering derivative vanishes (angle at the end-fire direction)."""


class SingularFim(IsacLabError, ArithmeticError):
    """Fisher information Schur complement is (numerically) zero."""


class ZeroIllumination(IsacLabError, ArithmeticError):
    """No transmit energy toward the target, so the angle is unidentifiable."""


class NonConvergent(IsacLabError, RuntimeError):
    """Numerical integration did not reach the requested tolerance."""
