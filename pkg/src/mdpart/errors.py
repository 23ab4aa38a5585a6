"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class NotMdpError(ValueError):
    """A partition violates the minimal-difference condition of a gap sequence."""


class EmptyClassError(ValueError):
    """The requested partition class has no elements, so nothing can be sampled."""


class RegimeError(ValueError):
    """A random-environment quantity is undefined in the given regime."""


class GapSpecError(ValueError):
    """Malformed gap-sequence text, or a spec that breaks the ``q_0 >= 1`` rule."""

    def __init__(self, message, position=None, token=None):
        self.position = position
        self.token = token
        if position is not None:
            message = f"{message} (at position {position}, token {token!r})"
        super().__init__(message)
