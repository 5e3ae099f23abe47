"""Stage orchestration shared by the CLI and the service."""

from __future__ import annotations

import logging

from .citations import SectionText, classify_section
from .gateway import Gateway
from .ingest import ExpansionConfig, GraphDelta, expand, search_topic
from .scholarly import ScholarlyBackend
from .store import PaperStore, iter_placeholder_edges

log = logging.getLogger(__name__)


def build_graph(topic: str, config: ExpansionConfig, backend: ScholarlyBackend,
                store: PaperStore | None = None, embedder=None) -> tuple[PaperStore, GraphDelta, str]:
    """Search the topic, seed the store with the key reference, expand around it."""
    store = store or PaperStore()
    hits = search_topic(backend, topic, 1)
    if not hits:
        return store, GraphDelta(), ""
    key_ref = hits[0]
    if not store.has_paper(key_ref.id):
        store.add_paper(key_ref)
    delta = expand(key_ref.id, config, store, backend, embedder=embedder)
    return store, delta, key_ref.id


def classify_graph(store: PaperStore, sections: list[SectionText], gateway: Gateway,
                   resolver: dict[str, str] | None = None) -> int:
    """Classify citation mentions and replace the matching ingest placeholders.

    Returns the number of classified quads admitted.  Mentions of papers
    absent from the store are skipped (the graph owns its entity set).
    """
    resolver = resolver or {}
    titles = {p.id: p.title for p in store.papers()}

    classified = []
    for section in sorted(sections, key=lambda s: (s.paper_id, s.heading)):
        if not store.has_paper(section.paper_id):
            continue
        for quad in classify_section(section, resolver, gateway, titles):
            if store.has_paper(quad.cited):
                classified.append(quad)

    # drop placeholders for pairs that now carry a classified relation
    covered = {(q.citing, q.cited) for q in classified}
    for edge_id, quad in list(iter_placeholder_edges(store)):
        if (quad.citing, quad.cited) in covered:
            store.remove_quad(edge_id)

    admitted = 0
    for quad in classified:
        before = store.quad_count
        store.add_quad(quad)
        if store.quad_count > before:
            admitted += 1
    return admitted
