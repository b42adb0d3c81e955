"""Exception hierarchy shared across the toolkit.

ValidationError covers bad inputs (files, config, CLI usage) and maps to
exit code 1; the other subclasses are runtime failures and map to exit
code 2.
"""


class BiasAuditError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(BiasAuditError):
    """Invalid input data, configuration, or arguments."""


class ComputationError(BiasAuditError):
    """Numerically degenerate or infeasible computation."""


class ScorerError(BiasAuditError):
    """Scorer backend failure: unreachable, wrong shape, out-of-range."""
