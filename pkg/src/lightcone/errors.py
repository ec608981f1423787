"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """An iterative method ran out of its iteration budget."""


class NumericalBreakdown(RuntimeError):
    """A simulation lost unitarity or overflowed."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    ``errors`` holds every problem found as ``(json_pointer, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
