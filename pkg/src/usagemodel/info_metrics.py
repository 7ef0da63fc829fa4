"""Entropy and split information gain over action-count distributions.

All values are in bits (log base 2). With integer counts c_a summing to T:

    entropy     = -sum_a (c_a / T) * log2(c_a / T)
    split gain  = entropy(parent)
                  - (T1 / T) * entropy(part1) - (T2 / T) * entropy(part2)

The part weights are action-instance fractions, not sequence-set sizes.
Zero-count actions contribute nothing (0 * log 0 = 0). Gain is
mathematically nonnegative and at most entropy(parent); floating point may
leave a residue of magnitude below 1e-12 around those bounds.
"""

from __future__ import annotations

import math
from typing import TypeAlias

from .distributions import ActionDistribution
from .errors import InvalidDistributionError, InvalidSplitError

Bits: TypeAlias = float

# Absolute tolerance for comparing gains; avoids tie-flapping in searches.
GAIN_EPS = 1e-12


def _count_entropy(counts: dict[str, int], total: int) -> Bits:
    # log2(T) - (1/T) * sum c*log2(c) is stabler than summing p*log2(p)
    # and makes single-outcome distributions exactly 0.
    if total == 1 or len(counts) == 1:
        return 0.0
    acc = 0.0
    for action in sorted(counts):
        c = counts[action]
        acc += c * math.log2(c)
    return math.log2(total) - acc / total


def entropy(dist: ActionDistribution) -> Bits:
    """Information needed to predict the next action, in bits."""
    if dist.total < 1:
        raise InvalidDistributionError("entropy of an empty distribution")
    return _count_entropy(dist.counts, dist.total)


def split_gain(
    parent: ActionDistribution,
    part1: ActionDistribution,
    part2: ActionDistribution,
) -> Bits:
    """Information gained by splitting ``parent`` into two parts.

    The parts must conserve counts entry-wise and both be non-empty.
    """
    if part1.total < 1 or part2.total < 1:
        raise InvalidSplitError("both parts must be non-empty")
    for action in set(parent.counts) | set(part1.counts) | set(part2.counts):
        if part1.get(action) + part2.get(action) != parent.get(action):
            raise InvalidSplitError(f"count conservation violated for {action!r}")
    return gain_from_counts(
        parent.counts, parent.total, part1.counts, part1.total, part2.counts, part2.total
    )


def gain_from_counts(
    parent_counts: dict[str, int],
    parent_total: int,
    counts1: dict[str, int],
    total1: int,
    counts2: dict[str, int],
    total2: int,
) -> Bits:
    """Gain computed from raw count maps; no conservation checks.

    The two weighted child terms are added before subtraction, so the
    result is exactly symmetric in the two parts.
    """
    parent_h = _count_entropy(parent_counts, parent_total)
    t1 = total1 * _count_entropy(counts1, total1) if total1 else 0.0
    t2 = total2 * _count_entropy(counts2, total2) if total2 else 0.0
    return parent_h - (t1 + t2) / parent_total
