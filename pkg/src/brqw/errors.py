"""Exception types shared across the package."""


class BudgetExceeded(RuntimeError):
    """An enumeration or simulation would exceed its configured size budget."""


class InvariantViolation(AssertionError):
    """A structural invariant that must always hold was found broken."""
