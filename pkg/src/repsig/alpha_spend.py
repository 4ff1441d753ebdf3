"""Constructors for partitions of the Type I error budget.

A partition spreads a budget alpha over divisions (criteria, decision points,
or subtests) as nonnegative entries whose sum never exceeds the budget; the
sum bound is exactly what Boole's inequality needs, so rounding is always
shaved downward, never up. Truncated geometric partitions intentionally
under-spend; the shortfall is visible as :attr:`AlphaPartition.remainder`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "AlphaPartition",
    "GeometricSpendConfig",
    "FinalWeightedConfig",
    "uniform_partition",
    "geometric_partition",
    "geometric_entry",
    "final_weighted_partition",
    "DEFAULT_GEOMETRIC_TERMS",
]

# Unbounded geometric spending materializes this many entries; later entries
# can be produced on demand with geometric_entry().
DEFAULT_GEOMETRIC_TERMS = 64

_SUM_TOL = 1e-15


@dataclass(frozen=True)
class AlphaPartition:
    """Nonnegative spending entries drawn from a total budget.

    ``sum(entries) <= total`` always holds; finite partitions spend the whole
    budget up to float rounding, truncated ones leave a positive remainder.
    """

    entries: tuple[float, ...]
    total: float

    def __post_init__(self):
        if not (0.0 < self.total < 1.0):
            raise DomainError(f"total budget must be in (0, 1), got {self.total}")
        if not self.entries:
            raise DomainError("partition must have at least one entry")
        for j, e in enumerate(self.entries):
            if not (e >= 0.0 and math.isfinite(e)):
                raise DomainError(f"entry {j + 1} must be nonnegative, got {e}")
        spent = math.fsum(self.entries)
        if spent > self.total * (1.0 + 1e-12) + _SUM_TOL:
            raise DomainError(
                f"entries sum to {spent}, exceeding the budget {self.total}"
            )

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def spent(self) -> float:
        return math.fsum(self.entries)

    @property
    def remainder(self) -> float:
        """Unspent budget; zero (up to rounding) for finite partitions."""
        return max(0.0, self.total - self.spent)


@dataclass(frozen=True)
class GeometricSpendConfig:
    """Withdrawal rate w in (0, 1) and an optional term count (None = unbounded)."""

    withdrawal_rate: float
    num_terms: int | None = None

    def __post_init__(self):
        if not (0.0 < self.withdrawal_rate < 1.0):
            raise DomainError(
                f"withdrawal rate must be in (0, 1), got {self.withdrawal_rate}"
            )
        if self.num_terms is not None and self.num_terms < 1:
            raise DomainError(f"num_terms must be >= 1, got {self.num_terms}")


@dataclass(frozen=True)
class FinalWeightedConfig:
    """Share theta of the budget reserved for the final decision point."""

    theta: float
    d: int

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0):
            raise DomainError(f"theta must be in (0, 1), got {self.theta}")
        if self.d < 2:
            raise DomainError(f"final weighting needs d >= 2, got {self.d}")


def uniform_partition(alpha: float, n: int) -> AlphaPartition:
    """Split alpha into n equal entries, shaving the last so the sum <= alpha."""
    _check_alpha(alpha)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    share = alpha / n
    entries = (share,) * n
    excess = math.fsum(entries) - alpha
    if excess > 0.0:
        entries = entries[:-1] + (share - excess,)
    return AlphaPartition(entries=entries, total=alpha)


def geometric_entry(alpha: float, withdrawal_rate: float, j: int) -> float:
    """Entry j (1-based) of the geometric spending sequence w(1-w)^(j-1) alpha."""
    _check_alpha(alpha)
    if not (0.0 < withdrawal_rate < 1.0):
        raise DomainError(f"withdrawal rate must be in (0, 1), got {withdrawal_rate}")
    if j < 1:
        raise DomainError(f"entry index must be >= 1, got {j}")
    return withdrawal_rate * (1.0 - withdrawal_rate) ** (j - 1) * alpha


def geometric_partition(alpha: float, config: GeometricSpendConfig) -> AlphaPartition:
    """Geometric spending: entry j gets w(1-w)^(j-1) alpha.

    Unbounded configs materialize DEFAULT_GEOMETRIC_TERMS entries; use
    :func:`geometric_entry` for indices past the materialized prefix. The sum
    of the first n entries is alpha * (1 - (1-w)^n), so truncation leaves a
    positive remainder by construction.
    """
    _check_alpha(alpha)
    n = config.num_terms if config.num_terms is not None else DEFAULT_GEOMETRIC_TERMS
    w = config.withdrawal_rate
    entries = tuple(geometric_entry(alpha, w, j) for j in range(1, n + 1))
    return AlphaPartition(entries=entries, total=alpha)


def final_weighted_partition(alpha: float, config: FinalWeightedConfig) -> AlphaPartition:
    """Reserve theta*alpha for the final point, spread the rest uniformly.

    The first d-1 entries each get (1-theta)*alpha/(d-1); the final entry
    gets theta*alpha (shaved if float rounding would overshoot the budget).
    """
    _check_alpha(alpha)
    early = (1.0 - config.theta) * alpha / (config.d - 1)
    final = config.theta * alpha
    entries = (early,) * (config.d - 1) + (final,)
    excess = math.fsum(entries) - alpha
    if excess > 0.0:
        entries = entries[:-1] + (final - excess,)
    return AlphaPartition(entries=entries, total=alpha)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
