"""Exception hierarchy shared by all repsig modules."""


class RepsigError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RepsigError, ValueError):
    """An argument is outside the documented domain of an operation."""


class PlanInvalidError(RepsigError, ValueError):
    """A test plan failed validation; ``violations`` lists the reasons."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid plan: " + "; ".join(self.violations))


class SequencingError(RepsigError, ValueError):
    """A p-value record arrived out of order or with a gap."""


class StateError(RepsigError, RuntimeError):
    """A monitor was updated after reaching a terminal decision."""


class ConfigError(RepsigError, ValueError):
    """A simulation or CLI configuration is internally inconsistent."""


class SchemaError(RepsigError, ValueError):
    """A document does not match its declared file format."""

