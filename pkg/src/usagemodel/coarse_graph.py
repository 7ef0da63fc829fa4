"""Coarse observed state space: states, counted transitions, action counts.

Trace-final actions lead to an unknown next state and are recorded as
transitions into the reserved terminal pseudo-state ``__END__``, which is
itself excluded from the observed state set, from splitting, and (by
default) from graph exports.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .distributions import ActionDistribution
from .errors import UnknownStateError
from .trace_store import TraceSet

END_STATE = "__END__"


@dataclass(frozen=True)
class CoarseModel:
    """Observed interface states with counted labeled transitions.

    ``transitions`` maps (state, action) to a per-destination count map;
    ``state_action_dist`` holds each state's next-action counts. For every
    state s and action a, the action count equals the sum of the outgoing
    transition counts for (s, a).
    """

    states: frozenset[str]
    transitions: dict[tuple[str, str], dict[str, int]]
    state_action_dist: dict[str, ActionDistribution]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoarseModel):
            return NotImplemented
        return (
            self.states == other.states
            and self.transitions == other.transitions
            and self.state_action_dist == other.state_action_dist
        )

    __hash__ = None  # type: ignore[assignment]


def build_coarse(traces: TraceSet) -> CoarseModel:
    """Tally consecutive pairs of every trace into a CoarseModel."""
    transitions: dict[tuple[str, str], Counter[str]] = {}
    action_tallies: dict[str, Counter[str]] = {}
    for trace in traces.traces:
        pairs = trace.pairs
        for i, (state, action) in enumerate(pairs):
            dest = pairs[i + 1][0] if i + 1 < len(pairs) else END_STATE
            key = (state, action)
            per_dest = transitions.get(key)
            if per_dest is None:
                per_dest = transitions[key] = Counter()
            per_dest[dest] += 1
            tally = action_tallies.get(state)
            if tally is None:
                tally = action_tallies[state] = Counter()
            tally[action] += 1
    return CoarseModel(
        states=frozenset(action_tallies),
        transitions={k: dict(v) for k, v in transitions.items()},
        state_action_dist={
            s: ActionDistribution.from_counts(t) for s, t in action_tallies.items()
        },
    )


def action_distribution(model: CoarseModel, state: str) -> ActionDistribution:
    """The stored next-action counts of ``state`` (not normalized)."""
    if state not in model.state_action_dist:
        raise UnknownStateError(f"state {state!r} not in model")
    return model.state_action_dist[state]
