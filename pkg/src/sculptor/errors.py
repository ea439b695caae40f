"""Exception hierarchy shared by the solvers, readers and the CLI."""


class SculptorError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SculptorError, ValueError):
    """Invalid user input: bad arguments, malformed files, broken manifests."""


class FormatError(InputError):
    """A file could not be parsed.

    ``location`` is a human readable position such as ``"line 4"`` or
    ``"byte 132"`` when one is known.
    """

    def __init__(self, message, path=None, location=None):
        self.path = None if path is None else str(path)
        self.location = location
        parts = []
        if self.path:
            parts.append(self.path)
        if location:
            parts.append(location)
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.message = message


class ManifestError(InputError):
    """Schema or semantic violations in a scene manifest.

    All violations are collected in ``violations`` so that a user sees every
    problem at once.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SolverError(SculptorError, RuntimeError):
    """A solver could not produce an estimate from otherwise valid input."""
