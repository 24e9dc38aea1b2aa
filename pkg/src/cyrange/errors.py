"""Exception types shared across the package."""

from __future__ import annotations


class CyrangeError(Exception):
    """Base class for all errors raised by cyrange."""


class ScenarioSyntaxError(CyrangeError):
    """Scenario document is not well-formed. Carries the source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(f"{message}{where}")


class SchemaError(CyrangeError):
    """Scenario document decoded but violates the schema. Carries field and reason."""

    def __init__(self, subject: str, reason: str):
        self.subject = subject
        self.reason = reason
        super().__init__(f"{subject}: {reason}")


class UnknownNodeError(CyrangeError):
    """An operation referenced a node id that is not part of the scenario."""


class InvalidScenarioError(CyrangeError):
    """A scenario with error-severity diagnostics was passed where a clean one is required."""


class IngestError(CyrangeError):
    """A scanner report could not be parsed into findings."""


class EnvironmentMismatchError(CyrangeError):
    """Finding sets carry environment tags that the operation cannot accept."""


class DriverError(CyrangeError):
    """A backend driver refused or failed an operation."""


class PlanExecutionError(CyrangeError):
    """Plan execution failed; previously created instances were rolled back.

    ``directive_index`` is 1-based into the plan's directive sequence.
    """

    def __init__(self, directive_index: int, cause: Exception):
        self.directive_index = directive_index
        self.cause = cause
        super().__init__(f"directive {directive_index} failed: {cause}")


class RollbackError(CyrangeError):
    """Plan execution failed and the rollback itself also failed for some instances."""

    def __init__(self, directive_index: int, cause: Exception, failures: list[tuple[str, Exception]]):
        self.directive_index = directive_index
        self.cause = cause
        self.failures = list(failures)
        leftover = ", ".join(instance for instance, _ in failures)
        super().__init__(
            f"directive {directive_index} failed: {cause}; rollback left instances: {leftover}"
        )


class DataFileError(CyrangeError):
    """A bundled or user-supplied data file (rules, maps, profiles) is malformed."""
