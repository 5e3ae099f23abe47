"""Two-phase beam search over the citation graph.

Each iteration runs relation exploration then entity exploration, each a
search step (graph scan) plus a prune step (ranker keeps the top W
continuations), so every surviving path grows by exactly one hop per
iteration.  Paths are simple: an entity never repeats.  Paths whose
endpoint has no unvisited neighbors are retained as finished trajectories
rather than dropped.

Pruning consults a ranker.  The default ranker prompts the gateway with a
closed-vocabulary choice and falls back to lexical similarity after the
parse-retry budget; a weight-table ranker supports oracle testing and
trace replay.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

from .embedding import HashingEmbedder, cosine
from .errors import (
    GatewayUnavailableError,
    InvalidConfigError,
    ParseFailureError,
)
from .gateway import PARSE_RETRIES, CompletionRequest, Gateway, parse_choice
from .records import dumps_canonical, read_records, write_records
from .store import (
    CitationPosition,
    CitationSemantics,
    GoAIQuad,
    PaperStore,
    SEMANTIC_DISPLAY,
)

log = logging.getLogger(__name__)

#: per-iteration dominance factor: a rank decision at depth d always outweighs
#: every decision at depths > d, so cumulative scores sort lexicographically
DOMINANCE = 1000.0


@dataclass(frozen=True)
class PathHop:
    from_entity: str
    position: CitationPosition
    semantics: CitationSemantics
    to_entity: str
    direction: str  # "backward" follows citing->cited, "forward" the reverse

    @property
    def relation(self) -> tuple[CitationPosition, CitationSemantics]:
        return (self.position, self.semantics)

    def quad_key(self) -> tuple[str, str, str, str]:
        citing, cited = ((self.from_entity, self.to_entity) if self.direction == "backward"
                         else (self.to_entity, self.from_entity))
        return (citing, cited, self.position.section_label, self.semantics.label)


@dataclass(frozen=True)
class ExplorationPath:
    origin: str
    hops: tuple[PathHop, ...] = ()
    score_trace: tuple[tuple[int, int], ...] = ()
    sort_value: float = 0.0

    def entities(self) -> list[str]:
        return [self.origin] + [h.to_entity for h in self.hops]

    def endpoint(self) -> str:
        return self.hops[-1].to_entity if self.hops else self.origin

    def fingerprint(self) -> str:
        raw = dumps_canonical([self.origin] + [
            [h.from_entity, h.to_entity, h.position.section_label,
             h.semantics.label, h.direction]
            for h in self.hops
        ])
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]

    def element_length(self) -> int:
        """Entities plus relations: 2 * hops + 1."""
        return 2 * len(self.hops) + 1


@dataclass
class BeamState:
    query: str
    width: int
    paths: list[ExplorationPath]
    iteration: int = 0
    frontier_relations: set[tuple[str, str, str]] = field(default_factory=set)

    @property
    def frontier_entities(self) -> set[str]:
        return {p.endpoint() for p in self.paths}


@dataclass(frozen=True)
class RelationCandidate:
    path_index: int
    base: ExplorationPath
    section_label: str
    semantics_label: str
    direction: str
    target_quads: tuple[GoAIQuad, ...]
    display: str
    fallback_text: str

    @property
    def pair(self) -> tuple[str, str]:
        return (self.section_label, self.semantics_label)


@dataclass(frozen=True)
class PartialPath:
    base: ExplorationPath
    candidate: RelationCandidate


@dataclass(frozen=True)
class PathCandidate:
    partial_index: int
    base: ExplorationPath
    hop: PathHop
    quad: GoAIQuad
    path: ExplorationPath  # base extended by hop, scores not yet assigned
    display: str
    fallback_text: str


@dataclass
class ExplorationResult:
    paths: list[ExplorationPath]
    truncated: bool = False
    iterations_completed: int = 0


class Ranker(Protocol):
    #: expensive rankers are skipped when the candidate set already fits the beam
    expensive: bool

    def rank_relations(self, query: str, candidates: list[RelationCandidate],
                       width: int, iteration: int) -> list[tuple[int, float | None]]: ...

    def rank_paths(self, query: str, candidates: list[PathCandidate],
                   width: int, iteration: int) -> list[tuple[int, float | None]]: ...


# --- beam construction ----------------------------------------------------

def init_beam(key_ref: str, query: str, width: int, store: PaperStore) -> BeamState:
    if width < 1:
        raise InvalidConfigError(f"beam width must be >= 1 (got {width})")
    store.get_paper(key_ref)  # raises unknown-entity
    return BeamState(query=query, width=width, paths=[ExplorationPath(origin=key_ref)])


def search_relations(
    state: BeamState, store: PaperStore
) -> tuple[list[RelationCandidate], list[ExplorationPath]]:
    """Candidate relations per path endpoint, plus paths with none (finished).

    A candidate groups every store edge at the endpoint sharing (section,
    semantics label, direction) whose far entity is not already on the path.
    """
    candidates: list[RelationCandidate] = []
    finished: list[ExplorationPath] = []
    for pi, path in enumerate(state.paths):
        endpoint = path.endpoint()
        visited = set(path.entities())
        groups: dict[tuple[str, str, str], list[GoAIQuad]] = {}
        for edge in store.neighbors(endpoint, "both"):
            if edge.neighbor in visited:
                continue
            hop_dir = "backward" if edge.direction == "outgoing" else "forward"
            key = (edge.position.section_label, edge.semantics.label, hop_dir)
            groups.setdefault(key, []).append(edge.quad)
        if not groups:
            finished.append(path)
            continue
        for key in sorted(groups):
            section, sem, direction = key
            quads = tuple(groups[key])
            chain = _chain_text(path, store)
            rel_text = f"({section}, {SEMANTIC_DISPLAY[sem]})"
            candidates.append(RelationCandidate(
                path_index=pi,
                base=path,
                section_label=section,
                semantics_label=sem,
                direction=direction,
                target_quads=quads,
                display=f"extend [{chain}] with relation {rel_text} [{direction}]",
                fallback_text=f"{section} {SEMANTIC_DISPLAY[sem]} {quads[0].semantics.evidence}",
            ))
    return candidates, finished


def prune_relations(
    state: BeamState,
    candidates: list[RelationCandidate],
    ranker: Ranker,
    trace: "TraceWriter | None" = None,
) -> list[PartialPath]:
    order = _rank(candidates, state.width, state.query, state.iteration + 1,
                  ranker, ranker.rank_relations, trace, phase="relations")
    partials = [PartialPath(base=candidates[i].base, candidate=candidates[i])
                for i, _score in order]
    state.frontier_relations = {
        (p.candidate.section_label, p.candidate.semantics_label, p.candidate.direction)
        for p in partials
    }
    return partials


def search_entities(partials: list[PartialPath], store: PaperStore) -> list[PathCandidate]:
    """Every entity reachable over each partial's chosen relation and direction."""
    out: list[PathCandidate] = []
    for qi, partial in enumerate(partials):
        base = partial.base
        endpoint = base.endpoint()
        for quad in partial.candidate.target_quads:
            neighbor = quad.cited if partial.candidate.direction == "backward" else quad.citing
            hop = PathHop(
                from_entity=endpoint,
                position=quad.position,
                semantics=quad.semantics,
                to_entity=neighbor,
                direction=partial.candidate.direction,
            )
            new_path = replace(base, hops=base.hops + (hop,))
            paper = store.get_paper(neighbor)
            rel_text = f"({quad.position.section_label}, {SEMANTIC_DISPLAY[quad.semantics.label]})"
            out.append(PathCandidate(
                partial_index=qi,
                base=base,
                hop=hop,
                quad=quad,
                path=new_path,
                display=f"[{_chain_text(new_path, store)}] (last hop relation {rel_text})",
                fallback_text=f"{paper.title} {paper.abstract}",
            ))
    return out


def prune_entities(
    state: BeamState,
    candidates: list[PathCandidate],
    ranker: Ranker,
    trace: "TraceWriter | None" = None,
) -> BeamState:
    iteration = state.iteration + 1
    order = _rank(candidates, state.width, state.query, iteration,
                  ranker, ranker.rank_paths, trace, phase="entities")
    kept: list[ExplorationPath] = []
    m = len(candidates)
    for rank_idx, (ci, score) in enumerate(order):
        cand = candidates[ci]
        if score is None:
            hop_value = (m - rank_idx) / m * DOMINANCE ** (-iteration)
            sort_value = cand.base.sort_value + hop_value
        else:
            sort_value = score
        kept.append(replace(
            cand.path,
            score_trace=cand.base.score_trace + ((iteration, rank_idx + 1),),
            sort_value=sort_value,
        ))
    return BeamState(query=state.query, width=state.width, paths=kept,
                     iteration=iteration, frontier_relations=state.frontier_relations)


def run_exploration(
    key_ref: str,
    query: str,
    width: int,
    max_depth: int,
    store: PaperStore,
    gateway: Gateway | None = None,
    ranker: Ranker | None = None,
    trace_path: str | Path | None = None,
) -> ExplorationResult:
    """Iterate relation/entity explore-prune until max_depth or the beam empties."""
    if max_depth < 0:
        raise InvalidConfigError(f"max_depth must be >= 0 (got {max_depth})")
    if ranker is None:
        if gateway is None:
            raise InvalidConfigError("run_exploration needs a gateway or a ranker")
        ranker = LlmRanker(gateway)

    trace = TraceWriter() if trace_path is not None else None
    if trace:
        trace.add({"kind": "explore_config", "key_ref": key_ref, "query": query,
                   "width": width, "max_depth": max_depth})

    state = init_beam(key_ref, query, width, store)
    finished: list[ExplorationPath] = []
    truncated = False

    if max_depth == 0:
        result = ExplorationResult(paths=list(state.paths), iterations_completed=0)
        _finalize_trace(trace, trace_path, result)
        return result

    while state.iteration < max_depth and state.paths:
        candidates, newly_finished = search_relations(state, store)
        finished.extend(newly_finished)
        if trace:
            trace.add({"kind": "relation_candidates", "iteration": state.iteration + 1,
                       "items": [_relation_record(c) for c in candidates],
                       "finished": [p.fingerprint() for p in newly_finished]})
        if not candidates:
            state.paths = []
            break
        try:
            partials = prune_relations(state, candidates, ranker, trace)
            path_candidates = search_entities(partials, store)
            if trace:
                trace.add({"kind": "entity_candidates", "iteration": state.iteration + 1,
                           "items": [_entity_record(c) for c in path_candidates]})
            state = prune_entities(state, path_candidates, ranker, trace)
        except GatewayUnavailableError:
            log.warning("gateway exhausted at iteration %d; returning partial beam",
                        state.iteration + 1)
            truncated = True
            break

    final = finished + state.paths
    final.sort(key=lambda p: (-p.sort_value, p.fingerprint()))
    result = ExplorationResult(
        paths=final[:width],
        truncated=truncated,
        iterations_completed=state.iteration,
    )
    _finalize_trace(trace, trace_path, result)
    return result


def _chain_text(path: ExplorationPath, store: PaperStore) -> str:
    parts = [store.get_paper(path.origin).title or path.origin]
    for hop in path.hops:
        rel = f"({hop.position.section_label}, {SEMANTIC_DISPLAY[hop.semantics.label]})"
        title = store.get_paper(hop.to_entity).title or hop.to_entity
        parts.append(f"-{rel} [{hop.direction}]-> {title}")
    return " ".join(parts)


def _rank(candidates, width, query, iteration, ranker, rank_fn, trace, phase):
    if not candidates:
        return []
    if len(candidates) <= width and ranker.expensive:
        order = [(i, None) for i in range(len(candidates))]
        method = "vacuous"
        digest = None
    else:
        order = rank_fn(query, candidates, width, iteration)[:width]
        method = getattr(ranker, "method", "ranker")
        digest = getattr(ranker, "last_digest", None)
    if trace:
        trace.add({
            "kind": "prune", "phase": phase, "iteration": iteration,
            "method": method, "prompt_digest": digest,
            "total": len(candidates),
            "chosen": [i for i, _ in order],
            "ranker_scores": [s for _, s in order],
        })
    return order


def _relation_record(c: RelationCandidate) -> dict:
    return {"path": c.base.fingerprint(), "section": c.section_label,
            "semantics": c.semantics_label, "direction": c.direction,
            "targets": [q.cited if c.direction == "backward" else q.citing
                        for q in c.target_quads]}


def _entity_record(c: PathCandidate) -> dict:
    return {"partial": c.partial_index, "to_entity": c.hop.to_entity,
            "fingerprint": c.path.fingerprint()}


# --- rankers ----------------------------------------------------------------

def choice_values(query: str, candidates, width: int) -> tuple[list[str], dict[str, str]]:
    """Keys C1..Cn and the placeholder map for a prune prompt."""
    keys = [f"C{i + 1}" for i in range(len(candidates))]
    block = "\n".join(f"{k}: {c.display}" for k, c in zip(keys, candidates))
    return keys, {"query": query, "candidates": block, "width": str(width)}


class LlmRanker:
    """Closed-vocabulary choice prompt over candidate keys C1..Cn.

    After the parse-retry budget the ranking falls back to lexical cosine
    similarity between each candidate's text and the query, tied by stable
    candidate order, so exploration always terminates offline.
    """

    expensive = True

    def __init__(self, gateway: Gateway, embedder=None):
        self.gateway = gateway
        self.embedder = embedder or HashingEmbedder()
        self.method = "gateway"
        self.last_digest: str | None = None

    def rank_relations(self, query, candidates, width, iteration):
        return self._rank("relation_prune", query, candidates, width)

    def rank_paths(self, query, candidates, width, iteration):
        return self._rank("entity_prune", query, candidates, width)

    def _rank(self, template_name, query, candidates, width):
        keys, values = choice_values(query, candidates, width)
        request = CompletionRequest(template_name=template_name, values=values)
        for _attempt in range(PARSE_RETRIES):
            response = self.gateway.complete(request)
            self.last_digest = response.digest
            try:
                chosen = parse_choice(response.text, keys)
            except ParseFailureError:
                continue
            self.method = "gateway"
            return [(keys.index(k), None) for k in chosen]
        self.method = "fallback"
        query_vec = self.embedder.embed(query)
        scored = [(i, cosine(self.embedder.embed(c.fallback_text), query_vec))
                  for i, c in enumerate(candidates)]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return [(i, None) for i, _s in scored]


class AdditiveRanker:
    """Deterministic scorer over a per-edge weight table.

    Hop weights are damped by DOMINANCE**iteration, so cumulative scores
    order paths lexicographically by their per-hop decisions; relation
    candidates score by their best reachable edge (an admissible bound).
    Used by the exhaustive-oracle tests and available for offline runs.
    """

    expensive = False

    def __init__(self, edge_weights: dict[str, float]):
        self.edge_weights = edge_weights
        self.method = "additive"
        self.last_digest = None

    def _hop(self, quad: GoAIQuad, iteration: int) -> float:
        return self.edge_weights.get(quad.edge_id(), 0.0) * DOMINANCE ** (-iteration)

    def rank_relations(self, query, candidates, width, iteration):
        scored = [
            (i, c.base.sort_value + max(self._hop(q, iteration) for q in c.target_quads))
            for i, c in enumerate(candidates)
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored

    def rank_paths(self, query, candidates, width, iteration):
        scored = [
            (i, c.base.sort_value + self._hop(c.quad, iteration))
            for i, c in enumerate(candidates)
        ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored


class ReplayRanker:
    """Replays the prune decisions recorded in a trace file."""

    expensive = False

    def __init__(self, prune_records: list[dict]):
        self._queue = list(prune_records)
        self.method = "replay"
        self.last_digest = None

    def _next(self, phase: str):
        if not self._queue:
            raise InvalidConfigError(f"trace exhausted before {phase} prune")
        rec = self._queue.pop(0)
        if rec.get("phase") != phase:
            raise InvalidConfigError(
                f"trace out of order: expected {phase}, found {rec.get('phase')}"
            )
        return list(zip(rec["chosen"], rec["ranker_scores"]))

    def rank_relations(self, query, candidates, width, iteration):
        return self._next("relations")

    def rank_paths(self, query, candidates, width, iteration):
        return self._next("entities")


# --- trace ------------------------------------------------------------------

class TraceWriter:
    def __init__(self):
        self.records: list[dict] = []

    def add(self, rec: dict) -> None:
        self.records.append(rec)


def _finalize_trace(trace: TraceWriter | None, trace_path, result: ExplorationResult) -> None:
    if trace is None or trace_path is None:
        return
    trace.add({"kind": "result", "truncated": result.truncated,
               "iterations": result.iterations_completed,
               "fingerprints": [p.fingerprint() for p in result.paths]})
    write_records(trace_path, trace.records)


def replay_trace(trace_path: str | Path, store: PaperStore) -> ExplorationResult:
    """Re-run an exploration from its trace; output must match the original."""
    records = [rec for _, rec in read_records(trace_path)]
    config = next(r for r in records if r.get("kind") == "explore_config")
    prunes = [r for r in records if r.get("kind") == "prune"]
    return run_exploration(
        key_ref=config["key_ref"],
        query=config["query"],
        width=config["width"],
        max_depth=config["max_depth"],
        store=store,
        ranker=ReplayRanker(prunes),
    )


# --- path record IO -----------------------------------------------------------

def path_to_record(path: ExplorationPath) -> dict:
    return {
        "kind": "path",
        "fingerprint": path.fingerprint(),
        "origin": path.origin,
        "sort_value": path.sort_value,
        "score_trace": [list(t) for t in path.score_trace],
        "hops": [
            {
                "from_entity": h.from_entity,
                "to_entity": h.to_entity,
                "direction": h.direction,
                "position": {"section_label": h.position.section_label,
                             "raw_heading": h.position.raw_heading},
                "semantics": {"label": h.semantics.label,
                              "evidence": h.semantics.evidence,
                              "confidence": h.semantics.confidence},
            }
            for h in path.hops
        ],
    }


def path_from_record(rec: dict) -> ExplorationPath:
    hops = tuple(
        PathHop(
            from_entity=h["from_entity"],
            position=CitationPosition(h["position"]["section_label"],
                                      h["position"].get("raw_heading", "")),
            semantics=CitationSemantics(h["semantics"]["label"],
                                        h["semantics"].get("evidence", ""),
                                        h["semantics"].get("confidence", 1.0)),
            to_entity=h["to_entity"],
            direction=h["direction"],
        )
        for h in rec.get("hops", ())
    )
    return ExplorationPath(
        origin=rec["origin"],
        hops=hops,
        score_trace=tuple(tuple(t) for t in rec.get("score_trace", ())),
        sort_value=rec.get("sort_value", 0.0),
    )


def save_paths(path: str | Path, paths: list[ExplorationPath]) -> None:
    write_records(path, [path_to_record(p) for p in paths])


def load_paths(path: str | Path) -> list[ExplorationPath]:
    return [path_from_record(rec) for _, rec in read_records(path)
            if rec.get("kind") == "path"]
