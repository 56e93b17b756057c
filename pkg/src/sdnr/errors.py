"""Exception hierarchy shared by the solver modules and the CLI."""

from __future__ import annotations


class SDNRError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationMismatchError(SDNRError, ValueError):
    """A switch configuration does not match the network's branch set."""


class TopologyError(SDNRError):
    """The network (or a configuration of it) has the wrong shape."""


class DivergenceError(SDNRError):
    """A power-flow iteration failed to converge."""


class InfeasibleError(SDNRError):
    """A converged solution violates an operating limit in reject mode."""

    def __init__(self, message: str, constraint: str, violation: float):
        super().__init__(message)
        self.constraint = constraint
        self.violation = violation


class ScenarioSolveError(SDNRError):
    """One or more scenarios of a stochastic solve failed."""

    def __init__(self, failures: dict[int, Exception]):
        self.failures = dict(failures)
        idx = ", ".join(str(i) for i in sorted(self.failures))
        first = self.failures[min(self.failures)]
        super().__init__(f"scenario(s) {idx} failed; first error: {first}")

    @property
    def only_infeasible(self) -> bool:
        return all(isinstance(e, InfeasibleError) for e in self.failures.values())


class PreconditionError(SDNRError, ValueError):
    """An algorithm was called on an input outside its domain."""


class AlgorithmFailure(SDNRError):
    """A search could not produce any feasible configuration."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class BudgetExceededError(SDNRError):
    """The exhaustive oracle refused to enumerate too many trees."""

    def __init__(self, count: int, budget: int):
        super().__init__(f"{count} spanning trees exceed the budget of {budget}")
        self.count = count
        self.budget = budget


class SchemaError(SDNRError, ValueError):
    """Input file does not follow the expected schema."""

    def __init__(self, message: str, location: str | None = None):
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location


class CaseReferenceError(SchemaError):
    """A case file refers to an id that does not exist."""


class DataError(SDNRError, ValueError):
    """Input data is present but unusable (e.g. empty after cleaning)."""
