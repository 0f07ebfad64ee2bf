"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """A caller-supplied argument violates an operation's contract."""


class DegenerateLabelsError(ArgumentError):
    """A binary quantity (fit or AUC) was requested with only one label present."""


class DataFormatError(ValueError):
    """An input or artifact file is malformed; the message names what and where."""


class NumericError(RuntimeError):
    """A numeric computation produced a non-finite value."""


class ConfigValidationError(ValueError):
    """An experiment configuration failed validation.

    ``violations`` holds every individual problem found, so a single run
    surfaces all of them at once.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))
