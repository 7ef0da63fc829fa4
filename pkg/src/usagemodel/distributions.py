"""Next-action count distributions.

Counts stay exact integers end to end; probabilities are derived on demand
so conservation checks never suffer rounding drift.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import InvalidDistributionError


@dataclass(frozen=True)
class ActionDistribution:
    """Nonnegative integer counts per action.

    Zero-count entries are never stored; ``total`` always equals the sum of
    the stored counts. The empty distribution (total 0) is allowed and is
    used for terminal substates that predict nothing.
    """

    counts: dict[str, int] = field(default_factory=dict)
    total: int = 0

    def __post_init__(self) -> None:
        if any(c <= 0 for c in self.counts.values()):
            raise InvalidDistributionError("counts must be positive integers")
        if self.total != sum(self.counts.values()):
            raise InvalidDistributionError("total does not match counts")

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> ActionDistribution:
        """Build a distribution, dropping zero entries and validating signs."""
        if any(c < 0 for c in counts.values()):
            raise InvalidDistributionError("negative count")
        clean = {a: int(c) for a, c in counts.items() if c != 0}
        return cls(counts=clean, total=sum(clean.values()))

    @classmethod
    def empty(cls) -> ActionDistribution:
        return cls(counts={}, total=0)

    @classmethod
    def merged(cls, dists: Iterable[ActionDistribution]) -> ActionDistribution:
        """Entry-wise sum of several distributions."""
        acc: Counter[str] = Counter()
        for d in dists:
            acc.update(d.counts)
        return cls.from_counts(acc)

    def get(self, action: str) -> int:
        return self.counts.get(action, 0)

    def probability(self, action: str) -> float:
        if self.total == 0:
            return 0.0
        return self.counts.get(action, 0) / self.total

    def items(self) -> Iterator[tuple[str, int]]:
        """Counts in deterministic (action-sorted) order."""
        return iter(sorted(self.counts.items()))

    def dominant_action(self) -> str | None:
        """Action with the maximal count; ties broken lexicographically."""
        if not self.counts:
            return None
        return min(self.counts, key=lambda a: (-self.counts[a], a))

    def __bool__(self) -> bool:
        return self.total > 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActionDistribution):
            return NotImplemented
        return self.counts == other.counts

    __hash__ = None  # type: ignore[assignment]
