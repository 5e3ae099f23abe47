"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import random

from goai.explorer import DOMINANCE, ExplorationPath, PathHop
from goai.scholarly import FixtureNetwork
from goai.store import (
    CitationPosition,
    CitationSemantics,
    GoAIQuad,
    PaperNode,
    PaperStore,
)

SECTIONS = ("Introduction", "Background", "RelatedWork", "Method",
            "Experiments", "Discussion", "Conclusion", "Appendix", "Other")
LABELS = ("BE", "SS", "CA", "QR", "MI")


def make_paper(pid: str, title: str | None = None, abstract: str = "",
               year: int | None = None) -> PaperNode:
    return PaperNode(id=pid, title=title if title is not None else f"Paper {pid}",
                     abstract=abstract, year=year, source="fixture")


def make_quad(citing: str, cited: str, section: str = "Introduction",
              label: str = "BE", evidence: str = "cites it",
              heading: str = "") -> GoAIQuad:
    return GoAIQuad(
        citing=citing,
        position=CitationPosition(section, heading or section),
        semantics=CitationSemantics(label, evidence if label != "MI" else evidence, 1.0),
        cited=cited,
    )


def random_store(rng: random.Random, max_papers: int = 12,
                 max_quads: int = 30) -> PaperStore:
    store = PaperStore()
    n = rng.randint(1, max_papers)
    ids = [f"p{i:02d}" for i in range(n)]
    for i, pid in enumerate(ids):
        embedding = None
        if rng.random() < 0.3:
            raw = [rng.uniform(-1, 1) for _ in range(4)]
            norm = sum(x * x for x in raw) ** 0.5 or 1.0
            embedding = tuple(x / norm for x in raw)
        store.add_paper(PaperNode(
            id=pid,
            title=f"Title {i}",
            abstract=f"abstract {i} " + " ".join(rng.choices("abcdefg", k=3)),
            authors=tuple(f"A{j}" for j in range(rng.randint(0, 3))),
            year=rng.choice([None, 1999, 2020, 2024]),
            venue=rng.choice(["", "VenueX"]),
            source="fixture",
            url="",
            embedding=embedding,
        ))
    if n >= 2:
        for _ in range(rng.randint(0, max_quads)):
            citing, cited = rng.sample(ids, 2)
            quad = make_quad(citing, cited, rng.choice(SECTIONS), rng.choice(LABELS),
                             evidence=f"evidence {rng.randint(0, 9)}")
            store.add_quad(quad)
    return store


def random_network(rng: random.Random, n_papers: int = 10,
                   topic: str = "shared topic words") -> tuple[FixtureNetwork, str]:
    """Citation network whose abstracts overlap the topic vocabulary."""
    net = FixtureNetwork()
    vocab = topic.split() + ["filler", "method", "result", "graph", "model"]
    ids = [f"n{i:02d}" for i in range(n_papers)]
    for pid in ids:
        words = rng.choices(vocab, k=rng.randint(3, 8))
        net.add(make_paper(pid, abstract=" ".join(words)), refs=[], citers=[])
    for pid in ids:
        others = [x for x in ids if x != pid]
        for ref in rng.sample(others, k=min(len(others), rng.randint(0, 3))):
            if ref not in net.refs[pid]:
                net.link(pid, ref)
    key = ids[0]
    net.topic_hits[topic] = [key]
    return net, key


def random_graph_store(rng: random.Random, max_nodes: int = 30,
                       max_edges: int = 120) -> tuple[PaperStore, str, dict[str, float]]:
    """Random quad graph plus a distinct-integer weight per edge."""
    store = PaperStore()
    n = rng.randint(4, max_nodes)
    ids = [f"g{i:02d}" for i in range(n)]
    for pid in ids:
        store.add_paper(make_paper(pid))
    target_edges = rng.randint(n, max_edges)
    seen: set[tuple] = set()
    quads = []
    for _ in range(target_edges * 2):
        if len(quads) >= target_edges:
            break
        citing, cited = rng.sample(ids, 2)
        quad = make_quad(citing, cited, rng.choice(SECTIONS[:4]),
                         rng.choice(("BE", "SS", "CA")), evidence="e")
        if quad.key() in seen:
            continue
        seen.add(quad.key())
        store.add_quad(quad)
        quads.append(quad)
    weight_values = list(range(1, len(quads) + 1))
    rng.shuffle(weight_values)
    weights = {q.edge_id(): float(w) for q, w in zip(quads, weight_values)}
    return store, ids[0], weights


def enumerate_simple_paths(store: PaperStore, origin: str,
                           max_depth: int) -> list[ExplorationPath]:
    """Brute-force oracle: every simple path that is maximal or max_depth hops."""
    out: list[ExplorationPath] = []

    def moves(path: ExplorationPath) -> list[PathHop]:
        endpoint = path.endpoint()
        visited = set(path.entities())
        hops = []
        for edge in store.neighbors(endpoint, "both"):
            if edge.neighbor in visited:
                continue
            hops.append(PathHop(
                from_entity=endpoint,
                position=edge.position,
                semantics=edge.semantics,
                to_entity=edge.neighbor,
                direction="backward" if edge.direction == "outgoing" else "forward",
            ))
        return hops

    def walk(path: ExplorationPath) -> None:
        nxt = moves(path) if len(path.hops) < max_depth else []
        if not nxt:
            out.append(path)
            return
        for hop in nxt:
            walk(ExplorationPath(origin=path.origin, hops=path.hops + (hop,)))

    walk(ExplorationPath(origin=origin))
    return out


def additive_score(path: ExplorationPath, store: PaperStore,
                   weights: dict[str, float]) -> float:
    edge_ids = {q.key(): q.edge_id() for q in store.quads()}
    score = 0.0
    for depth, hop in enumerate(path.hops, start=1):
        score += weights[edge_ids[hop.quad_key()]] * DOMINANCE ** (-depth)
    return score
