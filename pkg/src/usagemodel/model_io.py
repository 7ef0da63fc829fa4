"""Model document serialization and graph-layout export.

The model document is JSON with sorted keys and two-space indentation, so
exporting the same model twice yields byte-identical text. All counts are
persisted as exact integers; conservation is re-checked on import. Graph
export emits Graphviz DOT, one node per state or substate and one edge per
transition labeled ``action (count)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from typing import Any

from .coarse_graph import END_STATE, CoarseModel
from .distributions import ActionDistribution
from .errors import ModelFormatError, ModelIntegrityError, ModelVersionError
from .refiner import RefinedModel, SplitConfig, SubState, SuffixPattern
from .split_search import SearchParams
from .trace_store import HistorySequence, sequence_sort_key

FORMAT_VERSION = 1


def _pairs_to_lists(items: tuple[tuple[str, str], ...]) -> list[list[str]]:
    return [[s, a] for s, a in items]


def _substate_doc(sub: SubState) -> dict[str, Any]:
    return {
        "id": sub.id,
        "dominant_action": sub.dominant_action,
        "terminal": sub.terminal,
        "dist": dict(sub.dist.counts),
        "sequences": [
            _pairs_to_lists(seq.items)
            for seq in sorted(sub.sequences, key=sequence_sort_key)
        ],
        "patterns": [_pairs_to_lists(p.items) for p in sub.patterns],
    }


def export_model(model: RefinedModel) -> str:
    """Serialize a refined model to deterministic document text."""
    coarse_transitions: dict[str, dict[str, dict[str, int]]] = {}
    for (state, action), dests in model.coarse.transitions.items():
        coarse_transitions.setdefault(state, {})[action] = dict(dests)
    doc = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "coarse": {
            "states": sorted(model.coarse.states),
            "action_dist": {
                s: dict(d.counts) for s, d in model.coarse.state_action_dist.items()
            },
            "transitions": coarse_transitions,
        },
        "substates": {
            state: [_substate_doc(sub) for sub in subs]
            for state, subs in model.substates.items()
        },
        "transitions": {
            src: {action: dict(dist.counts) for action, dist in per_action.items()}
            for src, per_action in model.transitions.items()
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise ModelFormatError(f"{where}: {message}")


def _counts_from(doc: Any, where: str) -> ActionDistribution:
    _require(isinstance(doc, dict), where, "expected an object of counts")
    for action, count in doc.items():
        _require(
            isinstance(count, int) and not isinstance(count, bool) and count > 0,
            where,
            f"count for {action!r} must be a positive integer",
        )
    return ActionDistribution.from_counts(doc)


def _pairs_from(doc: Any, where: str) -> tuple[tuple[str, str], ...]:
    _require(isinstance(doc, list) and doc, where, "expected a non-empty list of pairs")
    items = []
    for entry in doc:
        _require(
            isinstance(entry, list)
            and len(entry) == 2
            and all(isinstance(x, str) for x in entry),
            where,
            "each pair must be [state, action]",
        )
        items.append((entry[0], entry[1]))
    return tuple(items)


def _substate_from(doc: Any, state: str, where: str) -> SubState:
    _require(isinstance(doc, dict), where, "expected a substate object")
    try:
        sequences = frozenset(
            HistorySequence(items=_pairs_from(seq, where))
            for seq in doc.get("sequences", [])
        )
        patterns = tuple(
            SuffixPattern(items=_pairs_from(p, where)) for p in doc.get("patterns", [])
        )
    except ValueError as exc:
        raise ModelFormatError(f"{where}: {exc}") from exc
    _require(isinstance(doc.get("id"), str), where, "missing substate id")
    return SubState(
        id=doc["id"],
        parent_state=state,
        sequences=sequences,
        patterns=patterns,
        dist=_counts_from(doc.get("dist", {}), f"{where}.dist"),
        dominant_action=doc.get("dominant_action"),
        terminal=bool(doc.get("terminal", False)),
    )


def _config_from(doc: Any) -> SplitConfig:
    _require(isinstance(doc, dict), "config", "expected an object")
    search_doc = doc.get("search", {})
    _require(isinstance(search_doc, dict), "config.search", "expected an object")
    try:
        search = SearchParams(**search_doc)
        return SplitConfig(
            g_min=doc["g_min"],
            a_min=doc["a_min"],
            sequence_length=doc["sequence_length"],
            search=search,
            strict_thresholds=doc.get("strict_thresholds", False),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"config: {exc}") from exc


def _check_integrity(model: RefinedModel) -> None:
    for state in model.coarse.states:
        if state not in model.substates:
            raise ModelIntegrityError(f"state {state!r} has no substates")
    for state, subs in model.substates.items():
        if state not in model.coarse.states:
            raise ModelIntegrityError(f"substates listed for unknown state {state!r}")
        if not subs:
            raise ModelIntegrityError(f"state {state!r} has an empty substate list")
        combined = ActionDistribution.merged(s.dist for s in subs)
        expected = model.coarse.state_action_dist.get(
            state, ActionDistribution.empty()
        )
        if combined != expected:
            raise ModelIntegrityError(
                f"substate distributions of {state!r} do not sum to the state's"
            )
        for sub in subs:
            if sub.dist and sub.dominant_action != sub.dist.dominant_action():
                raise ModelIntegrityError(
                    f"substate {sub.id!r} mislabels its dominant action"
                )
    for state, dist in model.coarse.state_action_dist.items():
        for action in dist.counts:
            dests = model.coarse.transitions.get((state, action))
            if dests is None or sum(dests.values()) != dist.get(action):
                raise ModelIntegrityError(
                    f"transition counts for ({state!r}, {action!r}) do not match"
                )
    ids = {sub.id for subs in model.substates.values() for sub in subs}
    if len(ids) != sum(len(subs) for subs in model.substates.values()):
        raise ModelIntegrityError("substate ids are not unique")
    for src, per_action in model.transitions.items():
        if src not in ids:
            raise ModelIntegrityError(f"transition from unknown substate {src!r}")
        for action, dist in per_action.items():
            for dst in dist.counts:
                if dst != END_STATE and dst not in ids:
                    raise ModelIntegrityError(
                        f"transition to unknown substate {dst!r}"
                    )


def import_model(text: str) -> RefinedModel:
    """Parse and validate a model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    _require(isinstance(doc, dict), "document", "expected a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported format_version: {version!r}")

    coarse_doc = doc.get("coarse")
    _require(isinstance(coarse_doc, dict), "coarse", "missing coarse section")
    states_doc = coarse_doc.get("states")
    _require(
        isinstance(states_doc, list)
        and all(isinstance(s, str) for s in states_doc),
        "coarse.states",
        "expected a list of state names",
    )
    dists_doc = coarse_doc.get("action_dist", {})
    _require(isinstance(dists_doc, dict), "coarse.action_dist", "expected an object")
    transitions: dict[tuple[str, str], dict[str, int]] = {}
    trans_doc = coarse_doc.get("transitions", {})
    _require(isinstance(trans_doc, dict), "coarse.transitions", "expected an object")
    for state, per_action in trans_doc.items():
        _require(
            isinstance(per_action, dict),
            f"coarse.transitions.{state}",
            "expected an object",
        )
        for action, dests in per_action.items():
            dist = _counts_from(dests, f"coarse.transitions.{state}.{action}")
            transitions[(state, action)] = dict(dist.counts)
    coarse = CoarseModel(
        states=frozenset(states_doc),
        transitions=transitions,
        state_action_dist={
            s: _counts_from(d, f"coarse.action_dist.{s}")
            for s, d in dists_doc.items()
        },
    )

    substates_doc = doc.get("substates")
    _require(isinstance(substates_doc, dict), "substates", "missing substates section")
    substates = {
        state: tuple(
            _substate_from(sub, state, f"substates.{state}[{i}]")
            for i, sub in enumerate(subs)
        )
        for state, subs in substates_doc.items()
    }

    refined_doc = doc.get("transitions", {})
    _require(isinstance(refined_doc, dict), "transitions", "expected an object")
    refined_transitions = {
        src: {
            action: _counts_from(dests, f"transitions.{src}.{action}")
            for action, dests in per_action.items()
        }
        for src, per_action in refined_doc.items()
    }

    model = RefinedModel(
        coarse=coarse,
        substates=substates,
        config=_config_from(doc.get("config")),
        transitions=refined_transitions,
    )
    _check_integrity(model)
    return model


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_lines(
    nodes: list[tuple[str, str]], edges: list[tuple[str, str, str]], name: str
) -> str:
    lines = [f"digraph {_dot_quote(name)} {{", "  rankdir=LR;"]
    for node_id, label in nodes:
        lines.append(f"  {_dot_quote(node_id)} [label={_dot_quote(label)}];")
    for src, dst, label in edges:
        lines.append(
            f"  {_dot_quote(src)} -> {_dot_quote(dst)} [label={_dot_quote(label)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(
    model: RefinedModel | CoarseModel,
    *,
    include_terminal: bool = False,
    name: str = "usage_model",
) -> str:
    """Render a model as DOT text with deterministic ordering.

    Edges into the terminal pseudo-state are omitted unless
    ``include_terminal`` is set.
    """
    if isinstance(model, CoarseModel):
        nodes = [(s, s) for s in sorted(model.states)]
        edges = []
        for (state, action), dests in sorted(model.transitions.items()):
            for dst, count in sorted(dests.items()):
                if dst == END_STATE and not include_terminal:
                    continue
                edges.append((state, dst, f"{action} ({count})"))
        if include_terminal and any(
            END_STATE in dests for dests in model.transitions.values()
        ):
            nodes.append((END_STATE, END_STATE))
        nodes.sort()
        edges.sort()
        return _dot_lines(nodes, edges, name)

    nodes = [
        (sub.id, sub.id)
        for subs in model.substates.values()
        for sub in subs
    ]
    edges = []
    saw_end = False
    for src, per_action in model.transitions.items():
        for action, dist in per_action.items():
            for dst, count in dist.items():
                if dst == END_STATE:
                    saw_end = True
                    if not include_terminal:
                        continue
                edges.append((src, dst, f"{action} ({count})"))
    if include_terminal and saw_end:
        nodes.append((END_STATE, END_STATE))
    nodes.sort()
    edges.sort()
    return _dot_lines(nodes, edges, name)
