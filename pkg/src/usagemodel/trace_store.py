"""Interaction-log ingestion and history-sequence extraction.

Log format: UTF-8 text, one record per line, tab-separated fields

    session<TAB>step<TAB>state<TAB>action

Lines beginning with ``#`` are comments; blank lines are ignored. Field
values must not contain tabs or the reserved sentinel token ``__BOT__``.
Steps within a session must be strictly increasing; sessions may be
interleaved freely in the file.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .distributions import ActionDistribution
from .errors import DuplicateStepError, LogParseError, StepOrderError

SENTINEL = "__BOT__"
SENTINEL_PAIR = (SENTINEL, SENTINEL)


@dataclass(frozen=True)
class Event:
    """One log record: an action taken from an observed interface state."""

    session: str
    step: int
    state: str
    action: str


@dataclass(frozen=True)
class Trace:
    """A session's (state, action) pairs in log order."""

    session: str
    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class TraceSet:
    """All traces of a log plus the observed state and action alphabets."""

    traces: tuple[Trace, ...]
    state_alphabet: frozenset[str]
    action_alphabet: frozenset[str]

    @classmethod
    def from_traces(cls, traces: Iterable[Trace]) -> TraceSet:
        ts = tuple(traces)
        states = frozenset(s for t in ts for s, _ in t.pairs)
        actions = frozenset(a for t in ts for _, a in t.pairs)
        return cls(traces=ts, state_alphabet=states, action_alphabet=actions)


@dataclass(frozen=True)
class HistorySequence:
    """Exactly L (state, action) pairs preceding an arrival at a state.

    Positions before the start of a session are padded with the sentinel
    pair, which always forms a contiguous prefix.
    """

    items: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("history sequence needs at least one pair")
        seen_real = False
        for state, action in self.items:
            is_sentinel = (state, action) == SENTINEL_PAIR
            if (state == SENTINEL) != (action == SENTINEL):
                raise ValueError("partial sentinel pair")
            if is_sentinel and seen_real:
                raise ValueError("sentinel pairs must form a contiguous prefix")
            if not is_sentinel:
                seen_real = True

    @property
    def length(self) -> int:
        return len(self.items)

    def suffix(self, length: int) -> tuple[tuple[str, str], ...]:
        return self.items[len(self.items) - length:]


def _parse_line(line_no: int, line: str) -> Event:
    fields = line.split("\t")
    if len(fields) != 4:
        raise LogParseError(line_no, f"expected 4 tab-separated fields, got {len(fields)}")
    session, step_text, state, action = fields
    for name, value in (("session", session), ("state", state), ("action", action)):
        if not value:
            raise LogParseError(line_no, f"empty {name} field")
        if SENTINEL in value:
            raise LogParseError(line_no, f"{name} contains reserved token {SENTINEL}")
    try:
        step = int(step_text)
    except ValueError:
        raise LogParseError(line_no, f"step is not an integer: {step_text!r}") from None
    if step < 0:
        raise LogParseError(line_no, f"step is negative: {step}")
    return Event(session=session, step=step, state=state, action=action)


def parse_log(text_lines: Iterable[str]) -> TraceSet:
    """Parse log lines into a TraceSet, grouping records by session.

    Sessions appear in the output in order of first occurrence. Raises
    LogParseError (with the offending line number) on malformed lines,
    DuplicateStepError on repeated (session, step), and StepOrderError when
    a session's steps do not increase.
    """
    order: list[str] = []
    per_session: dict[str, list[Event]] = {}
    for line_no, raw in enumerate(text_lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        event = _parse_line(line_no, line)
        events = per_session.get(event.session)
        if events is None:
            order.append(event.session)
            per_session[event.session] = [event]
            continue
        last = events[-1].step
        if event.step == last:
            raise DuplicateStepError(
                line_no, f"duplicate step {event.step} in session {event.session!r}"
            )
        if event.step < last:
            raise StepOrderError(
                line_no,
                f"step {event.step} after {last} in session {event.session!r}",
            )
        events.append(event)
    traces = [
        Trace(session=s, pairs=tuple((e.state, e.action) for e in per_session[s]))
        for s in order
    ]
    return TraceSet.from_traces(traces)


def serialize_log(traces: TraceSet) -> str:
    """Render a TraceSet back to log text; inverse of parse_log."""
    lines = []
    for trace in traces.traces:
        for step, (state, action) in enumerate(trace.pairs):
            lines.append(f"{trace.session}\t{step}\t{state}\t{action}")
    return "\n".join(lines) + ("\n" if lines else "")


def preceding_window(
    pairs: tuple[tuple[str, str], ...], position: int, length: int
) -> HistorySequence:
    """The L pairs before ``position``, sentinel-padded at session start."""
    start = position - length
    window: list[tuple[str, str]] = []
    for i in range(start, position):
        window.append(pairs[i] if i >= 0 else SENTINEL_PAIR)
    return HistorySequence(items=tuple(window))


def history_sequences(
    traces: TraceSet, target_state: str, length: int
) -> dict[HistorySequence, ActionDistribution]:
    """Group every arrival at ``target_state`` by its preceding history.

    Each occurrence of the target state at position i contributes the L
    pairs at positions i-L..i-1 as the key and counts the action taken at
    position i. A state absent from all traces yields an empty map.
    """
    if length < 1:
        raise ValueError("history length must be >= 1")
    tallies: dict[HistorySequence, Counter[str]] = {}
    for trace in traces.traces:
        pairs = trace.pairs
        for i, (state, action) in enumerate(pairs):
            if state != target_state:
                continue
            key = preceding_window(pairs, i, length)
            tally = tallies.get(key)
            if tally is None:
                tally = tallies[key] = Counter()
            tally[action] += 1
    return {
        key: ActionDistribution.from_counts(tally) for key, tally in tallies.items()
    }


def sequence_sort_key(seq: HistorySequence) -> tuple[tuple[str, str], ...]:
    """Canonical ordering key for history sequences (lexicographic on items)."""
    return seq.items
