"""Exception types shared across the package.

Every error that a caller can act on has its own class; the CLI maps them
to exit codes (validation/model errors -> 2, capacity errors -> 3).
"""

from __future__ import annotations


class CausalBoundsError(Exception):
    """Base class for all package errors."""


class GraphValidationError(CausalBoundsError):
    """Graph violates one or more structural assumptions.

    ``violations`` is a list of ``(code, message)`` pairs; codes are the
    stable strings ``NotPartitioned``, ``ANodeHasParent``, ``AChildless``,
    ``ConfounderSpansPartition``, ``NotTopological``.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        lines = "; ".join(f"{code}: {msg}" for code, msg in violations)
        super().__init__(f"invalid graph: {lines}")


class ScopeOutsideB(CausalBoundsError):
    """An intervention/observation scope includes nodes outside the endogenous block."""


class DimensionMismatch(CausalBoundsError):
    """An arc table or probability table does not match the graph's dimensions."""


class CapExceeded(CausalBoundsError):
    """Response-profile space too large for an enumeration-based operation."""

    def __init__(self, size: int, cap: int, what: str = "response profiles"):
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: {size} exceeds cap {cap}")


class CapacityExceeded(CausalBoundsError):
    """Graph exceeds a hard structural capacity guard (node count or arc-table width)."""


class SizeCap(CausalBoundsError):
    """Linear program exceeds the configured solver column cap."""

    def __init__(self, columns: int, cap: int):
        self.columns = columns
        self.cap = cap
        super().__init__(f"LP has {columns} columns, exceeding solver cap {cap}")


class InfeasibleError(CausalBoundsError):
    """LP infeasible; signals a probability table outside the model's achievable set."""


class UnboundedError(CausalBoundsError):
    """LP unbounded; indicates a construction bug (all bound LPs are bounded by design)."""


class PreconditionFailed(CausalBoundsError):
    """A method's mathematical precondition does not hold for the given inputs."""


class ObservationInvalidatesQuery(CausalBoundsError):
    """No response profile satisfies both the query and the conditioning event."""


class ObservationImpossible(CausalBoundsError):
    """The conditioning event has probability zero under every model consistent with the table."""


class DichotomyViolation(CausalBoundsError):
    """Internal assertion: a valid arc table was neither inside nor disjoint from the
    observation-consistent profile set. Indicates an implementation bug."""


class BudgetExceeded(CausalBoundsError):
    """A time-budgeted run hit its wall-clock budget before finishing."""

    def __init__(self, elapsed_s: float, budget_s: float, progress: str = ""):
        self.elapsed_s = elapsed_s
        self.budget_s = budget_s
        self.progress = progress
        note = f" ({progress})" if progress else ""
        super().__init__(f"budget {budget_s:.0f}s exceeded after {elapsed_s:.1f}s{note}")
