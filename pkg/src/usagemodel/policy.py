"""Query surface of a refined model.

Given the current coarse state and the most recent (state, action) pairs,
``identify_substate`` picks the substate whose defining sequence or suffix
pattern gives the longest match against the window; histories no substate
recognizes fall back to the substate with the largest instance total.
"""

from __future__ import annotations

from dataclasses import dataclass

from .distributions import ActionDistribution
from .errors import UnknownStateError
from .refiner import RefinedModel, SubState
from .trace_store import SENTINEL_PAIR


@dataclass(frozen=True)
class HistoryWindow:
    """Up to L most recent (state, action) pairs plus the current state.

    ``pairs`` is ordered oldest first; it may be shorter or longer than the
    model's history length. Matching pads short windows with sentinel pairs
    and considers only the last L pairs of long ones.
    """

    state: str
    pairs: tuple[tuple[str, str], ...] = ()


def _padded(window: HistoryWindow, length: int) -> tuple[tuple[str, str], ...]:
    pairs = window.pairs[-length:]
    if len(pairs) < length:
        pairs = (SENTINEL_PAIR,) * (length - len(pairs)) + pairs
    return pairs


def identify_substate(model: RefinedModel, window: HistoryWindow) -> str:
    """Id of the substate matching the window; deterministic."""
    return _resolve(model, window).id


def _resolve(model: RefinedModel, window: HistoryWindow) -> SubState:
    candidates = model.substates.get(window.state)
    if candidates is None:
        raise UnknownStateError(f"state {window.state!r} not in refined model")
    if len(candidates) == 1:
        return candidates[0]
    padded = _padded(window, model.config.sequence_length)
    best: SubState | None = None
    best_len = 0
    for sub in candidates:
        matched = sub.match_length(padded)
        if matched > best_len:
            best, best_len = sub, matched
    if best is not None:
        return best
    return min(candidates, key=lambda s: (-s.dist.total, s.id))


def predict_next(model: RefinedModel, window: HistoryWindow) -> ActionDistribution:
    """Next-action counts of the identified substate (caller normalizes)."""
    return _resolve(model, window).dist
