"""Synthetic trace generation from a planted-mode ground truth, and
scoring of how well refinement recovers the planted structure.

A ground truth is a JSON document describing a skeleton of states, one or
more latent modes per state, and per-mode "card" budgets: each card names
an action, an exact count, and the (state, mode) the action leads to (null
ends the session). The predecessor signature of a mode is implied by the
cards routed into it.

Two generation regimes exist. ``exact`` truths must balance card in- and
out-flows per (state, mode); generation then deals every card exactly once
by decomposing the card multigraph into session paths (seeded Hierholzer
walk), so per-state action totals equal the configured budgets exactly.
``stochastic`` truths are sampled with replacement: cards are drawn
proportionally to their counts and sessions end on a null card or when the
sampled geometric length runs out, so totals match budgets only in
expectation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from itertools import permutations
from typing import Iterable

from .coarse_graph import CoarseModel
from .errors import TruthConfigError, UnreachableStatesWarning
from .policy import HistoryWindow, identify_substate, predict_next
from .refiner import RefinedModel
from .rng import SplitMix64, derive_seed
from .trace_store import Trace, TraceSet

Vertex = tuple[str, str]  # (state, mode)


@dataclass(frozen=True)
class Card:
    """An exact budget of one action from one (state, mode) vertex."""

    action: str
    count: int
    to: Vertex | None


@dataclass(frozen=True)
class GroundTruth:
    name: str
    kind: str  # "exact" or "stochastic"
    start: Vertex
    sessions: int
    decks: dict[Vertex, tuple[Card, ...]]
    trace_length_mean: float | None = None

    def states(self) -> list[str]:
        return sorted({state for state, _ in self.decks})

    def modes_of(self, state: str) -> list[str]:
        return sorted(
            mode
            for (s, mode), deck in self.decks.items()
            if s == state and sum(c.count for c in deck) > 0
        )

    def deck_total(self, vertex: Vertex) -> int:
        return sum(c.count for c in self.decks.get(vertex, ()))

    def state_action_totals(self, state: str) -> dict[str, int]:
        """Configured action budget of a state, summed over its modes."""
        totals: dict[str, int] = {}
        for (s, _), deck in self.decks.items():
            if s != state:
                continue
            for card in deck:
                totals[card.action] = totals.get(card.action, 0) + card.count
        return {a: c for a, c in totals.items() if c}

    def reachable_vertices(self) -> set[Vertex]:
        seen = {self.start}
        frontier = [self.start]
        while frontier:
            vertex = frontier.pop()
            for card in self.decks.get(vertex, ()):
                if card.to is not None and card.to not in seen:
                    seen.add(card.to)
                    frontier.append(card.to)
        return seen

    def unreachable_states(self) -> list[str]:
        reachable = {state for state, _ in self.reachable_vertices()}
        return sorted(set(self.states()) - reachable)


def _vertex_from(doc: object, where: str) -> Vertex:
    if (
        not isinstance(doc, list)
        or len(doc) != 2
        or not all(isinstance(x, str) for x in doc)
    ):
        raise TruthConfigError(f"{where}: expected [state, mode]")
    return (doc[0], doc[1])


def load_truth(text: str) -> GroundTruth:
    """Parse and validate a ground-truth document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TruthConfigError(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise TruthConfigError("document must be a JSON object")
    kind = doc.get("kind", "exact")
    if kind not in ("exact", "stochastic"):
        raise TruthConfigError(f"unknown kind {kind!r}")
    states_doc = doc.get("states")
    if not isinstance(states_doc, dict) or not states_doc:
        raise TruthConfigError("missing states section")
    decks: dict[Vertex, tuple[Card, ...]] = {}
    for state, modes in states_doc.items():
        if not isinstance(modes, dict) or not modes:
            raise TruthConfigError(f"state {state!r}: expected a map of modes")
        for mode, cards_doc in modes.items():
            where = f"{state}/{mode}"
            if not isinstance(cards_doc, list):
                raise TruthConfigError(f"{where}: expected a list of cards")
            cards = []
            for i, card_doc in enumerate(cards_doc):
                if not isinstance(card_doc, dict):
                    raise TruthConfigError(f"{where}[{i}]: expected a card object")
                action = card_doc.get("action")
                count = card_doc.get("count")
                if not isinstance(action, str) or not action:
                    raise TruthConfigError(f"{where}[{i}]: missing action")
                if not isinstance(count, int) or count < 1:
                    raise TruthConfigError(f"{where}[{i}]: count must be >= 1")
                to_doc = card_doc.get("to")
                to = None if to_doc is None else _vertex_from(to_doc, f"{where}[{i}].to")
                cards.append(Card(action=action, count=count, to=to))
            decks[(state, mode)] = tuple(cards)
    truth = GroundTruth(
        name=str(doc.get("name", "truth")),
        kind=kind,
        start=_vertex_from(doc.get("start"), "start"),
        sessions=int(doc.get("sessions", 0)),
        decks=decks,
        trace_length_mean=doc.get("trace_length", {}).get("mean")
        if isinstance(doc.get("trace_length"), dict)
        else None,
    )
    _validate(truth)
    return truth


def _validate(truth: GroundTruth) -> None:
    if truth.start not in truth.decks:
        raise TruthConfigError(f"start vertex {truth.start} has no deck")
    for vertex, deck in truth.decks.items():
        for card in deck:
            if card.to is not None and card.to not in truth.decks:
                raise TruthConfigError(
                    f"{vertex} routes {card.action!r} to undeclared vertex {card.to}"
                )
    if truth.kind == "stochastic":
        if truth.trace_length_mean is None or truth.trace_length_mean <= 1.0:
            raise TruthConfigError("stochastic truths need trace_length.mean > 1")
        return
    if truth.sessions < 1:
        raise TruthConfigError("exact truths need sessions >= 1")
    inflow: dict[Vertex, int] = {v: 0 for v in truth.decks}
    ends = 0
    for deck in truth.decks.values():
        for card in deck:
            if card.to is None:
                ends += card.count
            else:
                inflow[card.to] += card.count
    inflow[truth.start] += truth.sessions
    problems = []
    if ends != truth.sessions:
        problems.append(f"{ends} session-ending cards for {truth.sessions} sessions")
    for vertex in sorted(truth.decks):
        out = truth.deck_total(vertex)
        if inflow[vertex] != out:
            problems.append(f"{vertex}: inflow {inflow[vertex]} != deck size {out}")
    if problems:
        raise TruthConfigError("unbalanced card flows: " + "; ".join(problems))
    reachable = truth.reachable_vertices()
    stranded = [
        v for v in sorted(truth.decks) if truth.deck_total(v) and v not in reachable
    ]
    if stranded:
        raise TruthConfigError(f"vertices unreachable from start: {stranded}")


def packaged_truth(name: str) -> GroundTruth:
    """Load one of the ground truths shipped with the package."""
    path = resources.files("usagemodel").joinpath("data", name)
    return load_truth(path.read_text(encoding="utf-8"))


def _session_ids(n: int) -> list[str]:
    width = max(3, len(str(n)))
    return [f"s{i:0{width}d}" for i in range(1, n + 1)]


def _generate_exact(truth: GroundTruth, seed: int) -> list[Trace]:
    # Edges of the card multigraph; None is the session boundary vertex.
    adjacency: dict[Vertex | None, list[tuple[str | None, Vertex | None]]] = {
        None: [(None, truth.start)] * truth.sessions
    }
    for vertex in sorted(truth.decks):
        edges: list[tuple[str | None, Vertex | None]] = []
        for card in truth.decks[vertex]:
            edges.extend([(card.action, card.to)] * card.count)
        adjacency[vertex] = edges
    rng = SplitMix64(seed)
    rng.shuffle(adjacency[None])
    for vertex in sorted(truth.decks):
        rng.shuffle(adjacency[vertex])

    # Hierholzer walk from the boundary; balance and reachability were
    # validated at load, so the walk consumes every edge.
    stack: list[tuple[Vertex | None, tuple | None]] = [(None, None)]
    circuit: list[tuple[Vertex | None, str | None, Vertex | None]] = []
    while stack:
        vertex, incoming = stack[-1]
        edges = adjacency.get(vertex)
        if edges:
            action, dest = edges.pop()
            stack.append((dest, (vertex, action, dest)))
        else:
            stack.pop()
            if incoming is not None:
                circuit.append(incoming)
    circuit.reverse()
    leftovers = sum(len(edges) for edges in adjacency.values())
    if leftovers:
        raise TruthConfigError(f"{leftovers} cards were not consumed")

    sessions: list[list[tuple[str, str]]] = []
    current: list[tuple[str, str]] | None = None
    for src, action, dest in circuit:
        if src is None:
            current = []
            continue
        assert current is not None and action is not None
        current.append((src[0], action))
        if dest is None:
            sessions.append(current)
            current = None
    ids = _session_ids(len(sessions))
    return [
        Trace(session=sid, pairs=tuple(pairs))
        for sid, pairs in zip(ids, sessions)
    ]


def _geometric_length(rng: SplitMix64, mean: float) -> int:
    p = 1.0 / mean
    u = rng.random()
    if p >= 1.0:
        return 1
    return 1 + int(math.log1p(-u) / math.log1p(-p))


def _generate_stochastic(truth: GroundTruth, n_sessions: int, seed: int) -> list[Trace]:
    traces = []
    ids = _session_ids(n_sessions)
    for i, sid in enumerate(ids):
        rng = SplitMix64(derive_seed(seed, f"session:{i}"))
        length = _geometric_length(rng, truth.trace_length_mean or 2.0)
        pairs: list[tuple[str, str]] = []
        vertex: Vertex | None = truth.start
        while vertex is not None and len(pairs) < length:
            deck = truth.decks.get(vertex, ())
            total = sum(c.count for c in deck)
            if total == 0:
                break
            pick = rng.randrange(total)
            acc = 0
            chosen = deck[-1]
            for card in deck:
                acc += card.count
                if pick < acc:
                    chosen = card
                    break
            pairs.append((vertex[0], chosen.action))
            vertex = chosen.to
        traces.append(Trace(session=sid, pairs=tuple(pairs)))
    return traces


def generate_traces(truth: GroundTruth, n_sessions: int, seed: int) -> TraceSet:
    """Sample session traces from the ground truth; deterministic per seed.

    Exact truths realize their card budgets exactly and require
    ``n_sessions`` to equal the configured session count.
    """
    unreachable = truth.unreachable_states()
    if unreachable:
        warnings.warn(
            f"unreachable skeleton states: {', '.join(unreachable)}",
            UnreachableStatesWarning,
            stacklevel=2,
        )
    if truth.kind == "exact":
        if n_sessions != truth.sessions:
            raise TruthConfigError(
                f"exact truth {truth.name!r} generates exactly "
                f"{truth.sessions} sessions, not {n_sessions}"
            )
        traces = _generate_exact(truth, seed)
    else:
        traces = _generate_stochastic(truth, n_sessions, seed)
    return TraceSet.from_traces(traces)


def arrival_modes(truth: GroundTruth, trace: Trace) -> list[str] | None:
    """True latent mode at each position of a generated trace.

    Reconstructed by walking the card graph alongside the trace; returns
    None when the trace cannot be tracked (it does not fit the truth, or a
    step is ambiguous).
    """
    modes: list[str] = []
    vertex: Vertex | None = truth.start
    pairs = trace.pairs
    for i, (state, action) in enumerate(pairs):
        if vertex is None or vertex[0] != state:
            return None
        modes.append(vertex[1])
        if i + 1 == len(pairs):
            # Last pair; no further arrival to attribute a mode to.
            break
        next_state = pairs[i + 1][0]
        candidates = {
            card.to
            for card in truth.decks.get(vertex, ())
            if card.action == action
            and card.to is not None
            and card.to[0] == next_state
        }
        if len(candidates) != 1:
            return None
        vertex = candidates.pop()
    return modes


@dataclass(frozen=True)
class StateRecovery:
    state: str
    planted_modes: int
    recovered_substates: int
    purity: float | None
    dominant_shares: dict[str, float]


@dataclass(frozen=True)
class RecoveryReport:
    states: tuple[StateRecovery, ...]
    refined_log_loss: float
    coarse_log_loss: float
    predictions: int
    skipped_traces: int


def _alignment_purity(confusion: dict[tuple[str, str], int]) -> float | None:
    modes = sorted({m for m, _ in confusion})
    subs = sorted({s for _, s in confusion})
    total = sum(confusion.values())
    if not total:
        return None
    if len(modes) > 6 or len(subs) > 6:
        return None
    if len(modes) <= len(subs):
        best = max(
            sum(confusion.get((m, s), 0) for m, s in zip(modes, chosen))
            for chosen in permutations(subs, len(modes))
        )
    else:
        best = max(
            sum(confusion.get((m, s), 0) for m, s in zip(chosen, subs))
            for chosen in permutations(modes, len(subs))
        )
    return best / total


def _smoothed_loss_bits(count: int, total: int, alphabet_size: int, alpha: float) -> float:
    p = (count + alpha) / (total + alpha * alphabet_size)
    return -math.log(p) / math.log(2.0)


def score_recovery(
    truth: GroundTruth,
    refined: RefinedModel,
    heldout: TraceSet,
    smoothing: float = 0.5,
) -> RecoveryReport:
    """Score a refined model against the planted modes on held-out traces.

    Purity aligns recovered substates to planted modes one-to-one
    (exhaustive, at most 6 modes) over held-out arrivals. Log-losses are
    per-prediction bits with additive smoothing applied identically to the
    refined and the coarse model. Held-out traces visiting states unknown
    to the model are skipped and counted.
    """
    coarse: CoarseModel = refined.coarse
    length = refined.config.sequence_length
    alphabet = set()
    for dist in coarse.state_action_dist.values():
        alphabet.update(dist.counts)
    for trace in heldout.traces:
        alphabet.update(a for _, a in trace.pairs)
    alphabet_size = max(1, len(alphabet))

    confusion: dict[str, dict[tuple[str, str], int]] = {}
    trackable = True
    refined_bits = 0.0
    coarse_bits = 0.0
    predictions = 0
    skipped = 0
    for trace in heldout.traces:
        if any(s not in refined.substates for s, _ in trace.pairs):
            skipped += 1
            continue
        modes = arrival_modes(truth, trace)
        if modes is None:
            trackable = False
        pairs = trace.pairs
        for i, (state, action) in enumerate(pairs):
            window = HistoryWindow(state=state, pairs=pairs[max(0, i - length):i])
            sub_dist = predict_next(refined, window)
            refined_bits += _smoothed_loss_bits(
                sub_dist.get(action), sub_dist.total, alphabet_size, smoothing
            )
            coarse_dist = coarse.state_action_dist[state]
            coarse_bits += _smoothed_loss_bits(
                coarse_dist.get(action), coarse_dist.total, alphabet_size, smoothing
            )
            predictions += 1
            if modes is not None:
                sub_id = identify_substate(refined, window)
                per_state = confusion.setdefault(state, {})
                key = (modes[i], sub_id)
                per_state[key] = per_state.get(key, 0) + 1

    states = []
    for state in sorted(refined.substates):
        subs = refined.substates[state]
        shares = {
            sub.id: sub.dist.get(sub.dominant_action) / sub.dist.total
            for sub in subs
            if sub.dist and sub.dominant_action is not None
        }
        purity = None
        if trackable and state in confusion:
            purity = _alignment_purity(confusion[state])
        states.append(
            StateRecovery(
                state=state,
                planted_modes=len(truth.modes_of(state)),
                recovered_substates=len(subs),
                purity=purity,
                dominant_shares=shares,
            )
        )
    n = max(1, predictions)
    return RecoveryReport(
        states=tuple(states),
        refined_log_loss=refined_bits / n,
        coarse_log_loss=coarse_bits / n,
        predictions=predictions,
        skipped_traces=skipped,
    )


def identify_for(refined: RefinedModel, window: HistoryWindow) -> str:
    from .policy import identify_substate

    return identify_substate(refined, window)


def format_report(report: RecoveryReport) -> str:
    """Render a recovery report as deterministic plain text."""
    lines = []
    for entry in report.states:
        purity = "n/a" if entry.purity is None else f"{entry.purity:.3f}"
        lines.append(
            f"state {entry.state}: planted_modes={entry.planted_modes} "
            f"recovered_substates={entry.recovered_substates} purity={purity}"
        )
        for sub_id in sorted(entry.dominant_shares):
            lines.append(
                f"  {sub_id}: dominant_share={entry.dominant_shares[sub_id]:.3f}"
            )
    lines.append(
        f"log_loss_bits refined={report.refined_log_loss:.4f} "
        f"coarse={report.coarse_log_loss:.4f} "
        f"predictions={report.predictions} skipped={report.skipped_traces}"
    )
    return "\n".join(lines) + "\n"
