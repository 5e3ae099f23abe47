"""Topic search and bidirectional graph expansion.

Starting from a key reference, each direction (backward = references,
forward = citers) is expanded stepwise: fetch neighbors of every frontier
paper, rank them by cosine similarity against the combined topic + anchor
abstract document, keep the top K at or above the relevance floor, and
recurse from the newly added papers until N steps or an empty step.  Added
edges carry a placeholder relation (Other / MI / confidence 0) until the
citation-semantics classifier runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .embedding import Embedder, HashingEmbedder, cosine
from .errors import EmbedderFailureError, InvalidConfigError, UpstreamUnavailableError
from .scholarly import ScholarlyBackend
from .store import (
    CitationPosition,
    CitationSemantics,
    GoAIQuad,
    PaperNode,
    PaperStore,
)

log = logging.getLogger(__name__)

PLACEHOLDER_POSITION = CitationPosition(section_label="Other", raw_heading="")
PLACEHOLDER_SEMANTICS = CitationSemantics(label="MI", evidence="", confidence=0.0)


@dataclass(frozen=True)
class ExpansionConfig:
    K: int
    N: int
    relevance_floor: float = 0.05
    topic: str = ""

    def validate(self) -> None:
        if self.K < 1 or self.N < 1:
            raise InvalidConfigError(f"K and N must be >= 1 (got K={self.K}, N={self.N})")
        if not 0.0 <= self.relevance_floor <= 1.0:
            raise InvalidConfigError(f"relevance_floor {self.relevance_floor} outside [0,1]")

    def node_budget(self) -> int:
        """2 * sum_{i=1..N} K^i, the combinatorial form of the retrieval bound."""
        return 2 * sum(self.K**i for i in range(1, self.N + 1))


@dataclass
class GraphDelta:
    added_papers: list[PaperNode] = field(default_factory=list)
    added_quads: list[GoAIQuad] = field(default_factory=list)
    frontier_backward: list[str] = field(default_factory=list)
    frontier_forward: list[str] = field(default_factory=list)
    steps_taken: tuple[int, int] = (0, 0)  # (backward, forward)
    truncated: bool = False


_search_cache: dict[tuple[int, str, int], list[PaperNode]] = {}


def search_topic(backend: ScholarlyBackend, topic: str, limit: int) -> list[PaperNode]:
    """Top-ranked papers for a topic, in upstream relevance order."""
    if not topic:
        raise InvalidConfigError("topic must be non-empty")
    if limit < 1:
        raise InvalidConfigError(f"limit must be >= 1 (got {limit})")
    cache_key = (id(backend), topic, limit)
    if cache_key in _search_cache:
        return list(_search_cache[cache_key])
    results = backend.search(topic, limit)[:limit]
    for paper in results:
        paper.validate()
    _search_cache[cache_key] = list(results)
    return results


def rank_by_similarity(
    candidates: list[PaperNode],
    topic: str,
    anchor_abstract: str,
    embedder: Embedder | None = None,
) -> list[tuple[PaperNode, float]]:
    """Candidates sorted by cosine similarity to topic + anchor, descending.

    Ties break by paper id ascending; deterministic for a fixed embedder.
    """
    if not candidates:
        raise InvalidConfigError("candidates must be non-empty")
    embedder = embedder or HashingEmbedder()
    anchor_vec = embedder.embed(f"{topic}\n{anchor_abstract}".strip())
    scored = []
    for paper in candidates:
        try:
            vec = embedder.embed(f"{paper.title}\n{paper.abstract}".strip())
        except Exception as exc:
            raise EmbedderFailureError(f"embedder failed on {paper.id!r}: {exc}") from exc
        scored.append((paper, cosine(vec, anchor_vec)))
    scored.sort(key=lambda pair: (-pair[1], pair[0].id))
    return scored


def expand(
    key_ref: str,
    config: ExpansionConfig,
    store: PaperStore,
    backend: ScholarlyBackend,
    embedder: Embedder | None = None,
) -> GraphDelta:
    """Grow the store around one key reference; returns what was added.

    On upstream failure the partial delta is returned with the unexpanded
    frontier so the caller can resume.
    """
    config.validate()
    embedder = embedder or HashingEmbedder()
    if not store.has_paper(key_ref):
        raise InvalidConfigError(f"key reference {key_ref!r} not in store")
    anchor = store.get_paper(key_ref)

    delta = GraphDelta()
    added_ids: set[str] = set()

    for direction in ("backward", "forward"):
        frontier = [key_ref]
        last_step = 0
        try:
            for step in range(1, config.N + 1):
                next_frontier: list[str] = []
                for pid in frontier:
                    kept = _expand_one(pid, direction, config, store, backend,
                                       embedder, anchor, delta, added_ids)
                    next_frontier.extend(kept)
                if not next_frontier:
                    break
                last_step = step
                frontier = next_frontier
            frontier = []
        except UpstreamUnavailableError:
            log.warning("upstream unavailable during %s expansion; returning partial delta",
                        direction)
            delta.truncated = True
        if direction == "backward":
            delta.frontier_backward = sorted(frontier)
            delta.steps_taken = (last_step, delta.steps_taken[1])
        else:
            delta.frontier_forward = sorted(frontier)
            delta.steps_taken = (delta.steps_taken[0], last_step)
    return delta


def _expand_one(
    pid: str,
    direction: str,
    config: ExpansionConfig,
    store: PaperStore,
    backend: ScholarlyBackend,
    embedder: Embedder,
    anchor: PaperNode,
    delta: GraphDelta,
    added_ids: set[str],
) -> list[str]:
    """Expand a single frontier paper one step; returns newly added ids."""
    neighbors = (backend.references(pid) if direction == "backward"
                 else backend.citations(pid))
    # drop self-citations and duplicate entries, keep deterministic order
    seen: set[str] = set()
    candidates = []
    for paper in neighbors:
        if paper.id == pid or paper.id in seen:
            continue
        seen.add(paper.id)
        candidates.append(paper)
    if not candidates:
        return []

    ranked = rank_by_similarity(candidates, config.topic, anchor.abstract, embedder)
    kept = [(p, s) for p, s in ranked[: config.K] if s >= config.relevance_floor]

    newly_added: list[str] = []
    for paper, _score in kept:
        if not store.has_paper(paper.id):
            store.add_paper(paper)
            delta.added_papers.append(paper)
            added_ids.add(paper.id)
            newly_added.append(paper.id)
        quad = _placeholder_quad(pid, paper.id, direction)
        if quad is not None:
            before = store.quad_count
            store.add_quad(quad)
            if store.quad_count > before:
                delta.added_quads.append(quad)
    return newly_added


def _placeholder_quad(frontier_id: str, neighbor_id: str, direction: str) -> GoAIQuad | None:
    if frontier_id == neighbor_id:
        return None
    if direction == "backward":  # frontier paper cites its reference
        citing, cited = frontier_id, neighbor_id
    else:  # citer cites the frontier paper
        citing, cited = neighbor_id, frontier_id
    return GoAIQuad(
        citing=citing,
        position=PLACEHOLDER_POSITION,
        semantics=PLACEHOLDER_SEMANTICS,
        cited=cited,
    )
