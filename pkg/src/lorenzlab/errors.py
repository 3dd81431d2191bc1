"""Exception types shared across the lab."""


class LorenzLabError(Exception):
    """Base class for every error raised by the package."""


class InputError(LorenzLabError, ValueError):
    """Rejected input: non-finite parameters, degenerate intervals, bad words."""


class DomainError(LorenzLabError, ValueError):
    """Evaluation on the stable leaf x = 0 where the return map is undefined."""


class InadmissibleWordError(LorenzLabError):
    """The pullback cylinder of a symbolic word is empty."""


class NoPeriodicPointError(LorenzLabError):
    """f^l - id has no sign change on the cylinder of the word."""


class DepthCapError(LorenzLabError):
    """An iterative search exhausted its depth cap.

    ``diagnostic`` carries whatever partial state the search reached so that
    callers (and the CLI) can report it.
    """

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class EmptyFamilyError(LorenzLabError):
    """The required slope floor leaves no admissible perturbation range."""


class MathCheckFailure(LorenzLabError):
    """A mathematical check did not hold (CLI exit code 1)."""
