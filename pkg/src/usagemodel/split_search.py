"""Binary partitioning of a state's history sequences by information gain.

``binary_split`` runs a stochastic local search: start from a random
bipartition, move one sequence per step (greedy best with probability
``greedy_prob``, uniform otherwise), keep recently moved sequences tabu,
and re-randomize after a stretch of steps without improving the best seen
gain. ``exhaustive_split`` enumerates all bipartitions and serves as the
exact oracle for small tables.

Reproducibility contract: all randomness comes from one SplitMix64 stream
seeded with ``rng_seed``. Draws happen in a fixed order: (re)initialization
draws one uniform per sequence in canonical order (repeated until both
sets are non-empty); each step with at least one eligible move draws one
uniform for the greedy-vs-random branch, and the random branch draws one
``randrange`` over the eligible moves in canonical order. Steps with no
eligible move draw nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .distributions import ActionDistribution
from .errors import InvalidSplitError, TableTooLargeError, TableTooSmallError
from .info_metrics import GAIN_EPS, Bits, gain_from_counts
from .rng import SplitMix64
from .trace_store import HistorySequence, sequence_sort_key

EXHAUSTIVE_LIMIT = 20


@dataclass(frozen=True)
class SequenceTable:
    """History sequences of one state with their next-action counts."""

    entries: dict[HistorySequence, ActionDistribution]
    parent_dist: ActionDistribution

    def __post_init__(self) -> None:
        if self.parent_dist != ActionDistribution.merged(self.entries.values()):
            raise InvalidSplitError("parent_dist is not the sum of the entries")

    @classmethod
    def from_entries(
        cls, entries: dict[HistorySequence, ActionDistribution]
    ) -> SequenceTable:
        return cls(
            entries=dict(entries),
            parent_dist=ActionDistribution.merged(entries.values()),
        )

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SearchParams:
    """Local-search knobs; the defaults reproduce the reference setup of
    500 steps, 0.1 random-step probability, and restart after 80 stagnant
    steps. The tabu tenure has no published value and defaults to 10."""

    search_steps: int = 500
    greedy_prob: float = 0.9
    tabu_tenure: int = 10
    stagnation_limit: int = 80
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.search_steps < 1 or self.tabu_tenure < 1 or self.stagnation_limit < 1:
            raise ValueError("search parameters must be positive")
        if not 0.0 <= self.greedy_prob <= 1.0:
            raise ValueError("greedy_prob must be in [0, 1]")


@dataclass(frozen=True)
class Bipartition:
    """Two disjoint non-empty sequence sets covering a table's keys.

    ``set1`` is the side holding the canonically smallest sequence.
    """

    set1: frozenset[HistorySequence]
    set2: frozenset[HistorySequence]
    gain: Bits


def _clog2c(c: int) -> float:
    return c * math.log2(c) if c > 1 else 0.0


class _SearchState:
    """Mutable partition state with O(|alphabet|) gain evaluation.

    Per side we keep integer counts, the total, and the cached sum of
    c*log2(c); the cache is recomputed from the integer counts after every
    applied move, so float error never accumulates across steps.
    """

    def __init__(self, seq_dists: list[dict[str, int]], parent: ActionDistribution):
        self.seq_dists = seq_dists
        self.seq_totals = [sum(d.values()) for d in seq_dists]
        self.parent_total = parent.total
        self.parent_h = self._entropy(parent.counts, parent.total)
        self.side_of: list[int] = []
        self.counts = [dict[str, int](), dict[str, int]()]
        self.totals = [0, 0]
        self.sizes = [0, 0]
        self.sums = [0.0, 0.0]

    @staticmethod
    def _entropy(counts: dict[str, int], total: int) -> float:
        if total <= 1 or len(counts) <= 1:
            return 0.0
        acc = 0.0
        for a in sorted(counts):
            acc += _clog2c(counts[a])
        return math.log2(total) - acc / total

    def assign(self, side_of: list[int]) -> None:
        self.side_of = list(side_of)
        self.counts = [{}, {}]
        self.totals = [0, 0]
        self.sizes = [0, 0]
        for idx, side in enumerate(self.side_of):
            self.sizes[side] += 1
            self.totals[side] += self.seq_totals[idx]
            bucket = self.counts[side]
            for a, c in self.seq_dists[idx].items():
                bucket[a] = bucket.get(a, 0) + c
        self._refresh_sums()

    def _refresh_sums(self) -> None:
        for side in (0, 1):
            acc = 0.0
            for a in sorted(self.counts[side]):
                acc += _clog2c(self.counts[side][a])
            self.sums[side] = acc

    def _gain(self, t0: int, s0: float, t1: int, s1: float) -> float:
        w0 = t0 * math.log2(t0) - s0 if t0 > 0 else 0.0
        w1 = t1 * math.log2(t1) - s1 if t1 > 0 else 0.0
        return self.parent_h - (w0 + w1) / self.parent_total

    def current_gain(self) -> float:
        return self._gain(self.totals[0], self.sums[0], self.totals[1], self.sums[1])

    def gain_if_moved(self, idx: int) -> float:
        """Gain after moving sequence ``idx`` to the other side."""
        src = self.side_of[idx]
        dst = 1 - src
        s_src = self.sums[src]
        s_dst = self.sums[dst]
        c_src = self.counts[src]
        c_dst = self.counts[dst]
        for a, c in self.seq_dists[idx].items():
            old_src = c_src[a]
            s_src += _clog2c(old_src - c) - _clog2c(old_src)
            old_dst = c_dst.get(a, 0)
            s_dst += _clog2c(old_dst + c) - _clog2c(old_dst)
        t_src = self.totals[src] - self.seq_totals[idx]
        t_dst = self.totals[dst] + self.seq_totals[idx]
        if src == 0:
            return self._gain(t_src, s_src, t_dst, s_dst)
        return self._gain(t_dst, s_dst, t_src, s_src)

    def apply_move(self, idx: int) -> None:
        src = self.side_of[idx]
        dst = 1 - src
        self.side_of[idx] = dst
        self.sizes[src] -= 1
        self.sizes[dst] += 1
        self.totals[src] -= self.seq_totals[idx]
        self.totals[dst] += self.seq_totals[idx]
        c_src = self.counts[src]
        c_dst = self.counts[dst]
        for a, c in self.seq_dists[idx].items():
            left = c_src[a] - c
            if left:
                c_src[a] = left
            else:
                del c_src[a]
            c_dst[a] = c_dst.get(a, 0) + c
        self._refresh_sums()


def _random_assignment(rng: SplitMix64, n: int) -> list[int]:
    while True:
        sides = [0 if rng.random() < 0.5 else 1 for _ in range(n)]
        if 0 < sum(sides) < n:
            return sides


def _canonical_partition(
    sequences: list[HistorySequence], side_of: list[int], gain: float
) -> Bipartition:
    side_a = frozenset(s for s, side in zip(sequences, side_of) if side == 0)
    side_b = frozenset(s for s, side in zip(sequences, side_of) if side == 1)
    if sequences[0] in side_b:
        side_a, side_b = side_b, side_a
    return Bipartition(set1=side_a, set2=side_b, gain=gain)


def _exact_gain(
    table: SequenceTable, sequences: list[HistorySequence], side_of: list[int]
) -> float:
    c0: dict[str, int] = {}
    c1: dict[str, int] = {}
    for seq, side in zip(sequences, side_of):
        bucket = c0 if side == 0 else c1
        for a, c in table.entries[seq].counts.items():
            bucket[a] = bucket.get(a, 0) + c
    return gain_from_counts(
        table.parent_dist.counts,
        table.parent_dist.total,
        c0,
        sum(c0.values()),
        c1,
        sum(c1.values()),
    )


def _run_search(
    table: SequenceTable, params: SearchParams
) -> tuple[list[HistorySequence], list[int], list[float]]:
    """Core SLS loop. Returns (canonical sequences, best assignment,
    per-step best-gain trace). The trace starts with the initial gain."""
    sequences = sorted(table.entries, key=sequence_sort_key)
    n = len(sequences)
    state = _SearchState(
        [dict(table.entries[s].counts) for s in sequences], table.parent_dist
    )
    rng = SplitMix64(params.rng_seed)

    state.assign(_random_assignment(rng, n))
    best_gain = state.current_gain()
    best_sides = list(state.side_of)
    best_trace = [best_gain]
    last_moved: dict[int, int] = {}
    stagnant = 0

    for step in range(1, params.search_steps + 1):
        eligible = [
            idx
            for idx in range(n)
            if state.sizes[state.side_of[idx]] > 1
            and (idx not in last_moved or step - last_moved[idx] >= params.tabu_tenure)
        ]
        improved = False
        if eligible:
            use_greedy = rng.random() < params.greedy_prob
            if use_greedy:
                chosen = eligible[0]
                chosen_gain = state.gain_if_moved(chosen)
                for idx in eligible[1:]:
                    g = state.gain_if_moved(idx)
                    if g > chosen_gain + GAIN_EPS:
                        chosen, chosen_gain = idx, g
            else:
                chosen = eligible[rng.randrange(len(eligible))]
            state.apply_move(chosen)
            last_moved[chosen] = step
            gain = state.current_gain()
            if gain > best_gain + GAIN_EPS:
                best_gain = gain
                best_sides = list(state.side_of)
                improved = True
        if improved:
            stagnant = 0
        else:
            stagnant += 1
        if stagnant >= params.stagnation_limit:
            state.assign(_random_assignment(rng, n))
            last_moved.clear()
            stagnant = 0
            gain = state.current_gain()
            if gain > best_gain + GAIN_EPS:
                best_gain = gain
                best_sides = list(state.side_of)
        best_trace.append(best_gain)

    return sequences, best_sides, best_trace


def binary_split(table: SequenceTable, params: SearchParams) -> Bipartition:
    """Search for a high-gain bipartition of the table's sequences.

    Runs exactly ``params.search_steps`` move steps and returns the best
    bipartition observed, including the initial random one. Deterministic
    given ``params.rng_seed``. The returned gain is recomputed exactly from
    the integer counts of the winning sides.
    """
    if len(table) < 2:
        raise TableTooSmallError("need at least 2 sequences to split")
    sequences, best_sides, _ = _run_search(table, params)
    gain = _exact_gain(table, sequences, best_sides)
    return _canonical_partition(sequences, best_sides, gain)


def exhaustive_split(table: SequenceTable) -> Bipartition:
    """Enumerate all 2^(n-1) - 1 bipartitions and return a maximal one.

    Ties within 1e-12 are broken toward the lexicographically smallest
    ``set1`` under the canonical sequence ordering. Guarded to n <= 20.
    """
    n = len(table)
    if n < 2:
        raise TableTooSmallError("need at least 2 sequences to split")
    if n > EXHAUSTIVE_LIMIT:
        raise TableTooLargeError(f"{n} sequences exceed the exhaustive limit")
    sequences = sorted(table.entries, key=sequence_sort_key)
    seq_counts = [dict(table.entries[s].counts) for s in sequences]
    parent = table.parent_dist

    def enumerate_gains():
        """Yield (mask, gain) over all bipartitions in Gray-code order.

        Bit j of the mask puts sequence j+1 in side 2; sequence 0 is pinned
        to side 1, so each unordered bipartition appears exactly once.
        """
        c1 = {a: c for a, c in parent.counts.items()}
        t1 = parent.total
        c2: dict[str, int] = {}
        t2 = 0
        in_two = [False] * n
        mask = 0
        for i in range(1, 1 << (n - 1)):
            bit = (i & -i).bit_length() - 1
            idx = bit + 1
            mask ^= 1 << bit
            if in_two[idx]:
                src, dst = c2, c1
                t2 -= sum(seq_counts[idx].values())
                t1 += sum(seq_counts[idx].values())
            else:
                src, dst = c1, c2
                t1 -= sum(seq_counts[idx].values())
                t2 += sum(seq_counts[idx].values())
            in_two[idx] = not in_two[idx]
            for a, c in seq_counts[idx].items():
                left = src[a] - c
                if left:
                    src[a] = left
                else:
                    del src[a]
                dst[a] = dst.get(a, 0) + c
            yield mask, gain_from_counts(parent.counts, parent.total, c1, t1, c2, t2)

    max_gain = -math.inf
    for _, g in enumerate_gains():
        if g > max_gain:
            max_gain = g

    best_mask = None
    best_key: tuple[int, ...] | None = None
    best_gain = max_gain
    for mask, g in enumerate_gains():
        if g < max_gain - GAIN_EPS:
            continue
        key = tuple(
            idx for idx in range(n) if idx == 0 or not (mask >> (idx - 1)) & 1
        )
        if best_key is None or key < best_key:
            best_mask, best_key, best_gain = mask, key, g

    assert best_mask is not None
    side_of = [0] + [(best_mask >> (idx - 1)) & 1 for idx in range(1, n)]
    gain = _exact_gain(table, sequences, side_of)
    return _canonical_partition(sequences, side_of, gain)


def partition_distributions(
    table: SequenceTable, partition: Bipartition
) -> tuple[ActionDistribution, ActionDistribution]:
    """Aggregate the table's entries over the two sides of a bipartition."""
    d1 = ActionDistribution.merged(table.entries[s] for s in partition.set1)
    d2 = ActionDistribution.merged(table.entries[s] for s in partition.set2)
    return d1, d2
