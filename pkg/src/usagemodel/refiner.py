"""Hierarchical state refinement.

Every coarse state's history-sequence table is split recursively: a binary
split is accepted when its gain reaches ``g_min`` and both parts predict at
least ``a_min`` action instances, and the parts are then split again. The
surviving groups become substates. A final pass replaces sequence groups
with the shortest trailing subsequence that still discriminates membership
within the whole table.

Threshold comparisons are non-strict by default ("at least"); set
``strict_thresholds`` to use strictly-greater comparisons instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .coarse_graph import END_STATE, CoarseModel
from .distributions import ActionDistribution
from .rng import derive_seed
from .split_search import (
    Bipartition,
    SearchParams,
    SequenceTable,
    binary_split,
    partition_distributions,
)
from .trace_store import (
    HistorySequence,
    TraceSet,
    history_sequences,
    preceding_window,
    sequence_sort_key,
)


@dataclass(frozen=True)
class SplitConfig:
    """Refinement thresholds and search parameters.

    Defaults reproduce the reference configuration: minimum gain 0.15 bits,
    minimum 10 predicted action instances per part, history length 5.
    """

    g_min: float = 0.15
    a_min: int = 10
    sequence_length: int = 5
    search: SearchParams = field(default_factory=SearchParams)
    strict_thresholds: bool = False

    def __post_init__(self) -> None:
        if self.a_min < 1 or self.sequence_length < 1:
            raise ValueError("a_min and sequence_length must be positive")


@dataclass(frozen=True)
class SuffixPattern:
    """Matches any full-length sequence whose last pairs equal ``items``."""

    items: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("empty suffix pattern")

    @property
    def length(self) -> int:
        return len(self.items)

    def matches(self, window: tuple[tuple[str, str], ...]) -> bool:
        n = len(self.items)
        return len(window) >= n and window[len(window) - n:] == self.items


@dataclass(frozen=True)
class SubState:
    """A group of histories leading to one coarse state, with the
    next-action counts they jointly predict.

    ``sequences`` holds full-length histories not covered by any adopted
    ``patterns`` entry. A state that was never split passes through as a
    single substate whose id is the plain state name; substates of split
    states are named ``parent/dominant-action`` with an ordinal appended on
    collision.
    """

    id: str
    parent_state: str
    sequences: frozenset[HistorySequence]
    patterns: tuple[SuffixPattern, ...]
    dist: ActionDistribution
    dominant_action: str | None
    terminal: bool = False

    def match_length(self, window: tuple[tuple[str, str], ...]) -> int:
        """Length of the longest matcher matching the window's suffix.

        Full sequences count as length-L matchers; 0 means no match.
        """
        if window:
            try:
                if HistorySequence(items=window) in self.sequences:
                    return len(window)
            except ValueError:
                pass
        best = 0
        for pattern in self.patterns:
            if pattern.length > best and pattern.matches(window):
                best = pattern.length
        return best


@dataclass(frozen=True)
class RefinedModel:
    """Coarse model plus per-state substates and substate transitions."""

    coarse: CoarseModel
    substates: dict[str, tuple[SubState, ...]]
    config: SplitConfig
    transitions: dict[str, dict[str, ActionDistribution]]

    def substate_index(self) -> dict[str, SubState]:
        return {sub.id: sub for subs in self.substates.values() for sub in subs}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RefinedModel):
            return NotImplemented
        return (
            self.coarse == other.coarse
            and self.substates == other.substates
            and self.config == other.config
            and self.transitions == other.transitions
        )

    __hash__ = None  # type: ignore[assignment]


def _accepts(config: SplitConfig, gain: float, total1: int, total2: int) -> bool:
    if config.strict_thresholds:
        return gain > config.g_min and total1 > config.a_min and total2 > config.a_min
    return gain >= config.g_min and total1 >= config.a_min and total2 >= config.a_min


def _split_keys(
    table: SequenceTable,
    keys: frozenset[HistorySequence],
    config: SplitConfig,
    seed: int,
) -> list[frozenset[HistorySequence]]:
    if len(keys) < 2:
        return [keys]
    sub_table = SequenceTable.from_entries({k: table.entries[k] for k in keys})
    params = replace(config.search, rng_seed=seed)
    part: Bipartition = binary_split(sub_table, params)
    d1, d2 = partition_distributions(sub_table, part)
    if not _accepts(config, part.gain, d1.total, d2.total):
        return [keys]
    left = _split_keys(table, part.set1, config, derive_seed(seed, "1"))
    right = _split_keys(table, part.set2, config, derive_seed(seed, "2"))
    return left + right


def _name_substates(
    parent_state: str,
    groups: list[frozenset[HistorySequence]],
    table: SequenceTable,
) -> list[SubState]:
    drafts = []
    for keys in groups:
        dist = ActionDistribution.merged(table.entries[k] for k in keys)
        drafts.append((keys, dist, dist.dominant_action()))
    drafts.sort(
        key=lambda d: (
            -d[1].total,
            d[2] or "",
            min(sequence_sort_key(k) for k in d[0]),
        )
    )
    result = []
    used: dict[str, int] = {}
    for keys, dist, dominant in drafts:
        if len(drafts) == 1:
            name = parent_state
        else:
            base = f"{parent_state}/{dominant}"
            seen = used.get(base, 0) + 1
            used[base] = seen
            name = base if seen == 1 else f"{base}.{seen}"
        result.append(
            SubState(
                id=name,
                parent_state=parent_state,
                sequences=frozenset(keys),
                patterns=(),
                dist=dist,
                dominant_action=dominant,
            )
        )
    result.sort(key=lambda s: (-s.dist.total, s.id))
    return result


def split_state(
    table: SequenceTable, config: SplitConfig, parent_state: str = "state"
) -> list[SubState]:
    """Recursively split a state's sequence table into substates.

    Recursion stops where the gain or instance-count gates fail or a group
    has fewer than two distinct sequences. Substates are ordered by
    descending predicted-instance total, ties by id, and named after
    ``parent_state``.
    """
    if not table.entries:
        raise ValueError("cannot split an empty table")
    groups = _split_keys(
        table, frozenset(table.entries), config, config.search.rng_seed
    )
    return _name_substates(parent_state, groups, table)


def merge_suffixes(
    substates: list[SubState], table: SequenceTable, length: int
) -> list[SubState]:
    """Replace sequence groups by shorter discriminating suffixes.

    For suffix lengths 1..L-1 in increasing order, a group of a substate's
    remaining sequences sharing a suffix becomes that suffix pattern if
    every sequence in the entire table with that suffix belongs to the
    substate. Covered sequences are dropped; membership is unchanged.
    """
    if length < 2:
        return list(substates)
    owner_of: dict[HistorySequence, int] = {}
    for idx, sub in enumerate(substates):
        for key in sub.sequences:
            owner_of[key] = idx
    result = []
    for idx, sub in enumerate(substates):
        remaining = set(sub.sequences)
        adopted: list[SuffixPattern] = []
        for suffix_len in range(1, length):
            by_suffix: dict[tuple[tuple[str, str], ...], list[HistorySequence]] = {}
            for key in remaining:
                by_suffix.setdefault(key.suffix(suffix_len), []).append(key)
            for suffix in sorted(by_suffix):
                discriminating = all(
                    owner_of[key] == idx
                    for key in table.entries
                    if key.suffix(suffix_len) == suffix
                )
                if discriminating:
                    adopted.append(SuffixPattern(items=suffix))
                    for key in by_suffix[suffix]:
                        remaining.discard(key)
        adopted.sort(key=lambda p: (p.length, p.items))
        result.append(
            replace(sub, sequences=frozenset(remaining), patterns=tuple(adopted))
        )
    return result


def refine_model(
    coarse: CoarseModel, traces: TraceSet, config: SplitConfig
) -> RefinedModel:
    """Refine every coarse state and rebuild transitions at substate level.

    Each state's search seeds derive from (config seed, state name), so
    per-state results do not depend on iteration order. Transitions are
    reconstructed by replaying every trace and attributing each occurrence
    to the substate owning its preceding history.
    """
    substates: dict[str, tuple[SubState, ...]] = {}
    lookup: dict[str, dict[HistorySequence, str]] = {}
    for state in sorted(coarse.states):
        entries = history_sequences(traces, state, config.sequence_length)
        if not entries:
            passthrough = SubState(
                id=state,
                parent_state=state,
                sequences=frozenset(),
                patterns=(),
                dist=ActionDistribution.empty(),
                dominant_action=None,
                terminal=True,
            )
            substates[state] = (passthrough,)
            lookup[state] = {}
            continue
        table = SequenceTable.from_entries(entries)
        state_config = replace(
            config,
            search=replace(
                config.search, rng_seed=derive_seed(config.search.rng_seed, state)
            ),
        )
        named = split_state(table, state_config, parent_state=state)
        lookup[state] = {seq: sub.id for sub in named for seq in sub.sequences}
        substates[state] = tuple(merge_suffixes(named, table, config.sequence_length))

    length = config.sequence_length
    tallies: dict[str, dict[str, dict[str, int]]] = {}
    for trace in traces.traces:
        pairs = trace.pairs
        for i, (state, action) in enumerate(pairs):
            src = lookup[state][preceding_window(pairs, i, length)]
            if i + 1 < len(pairs):
                nxt = pairs[i + 1][0]
                dst = lookup[nxt][preceding_window(pairs, i + 1, length)]
            else:
                dst = END_STATE
            per_action = tallies.setdefault(src, {})
            per_dest = per_action.setdefault(action, {})
            per_dest[dst] = per_dest.get(dst, 0) + 1

    transitions = {
        src: {
            action: ActionDistribution.from_counts(dests)
            for action, dests in per_action.items()
        }
        for src, per_action in tallies.items()
    }
    return RefinedModel(
        coarse=coarse, substates=substates, config=config, transitions=transitions
    )
