#!/usr/bin/env python3
"""Run the scripted demo exploration end to end and print the artifacts.

Builds the fixture graph via ingest + classification, explores with the
scripted gateway, synthesizes one trajectory, and reviews its hint idea.
"""

from goai import fixtures
from goai.explorer import run_exploration
from goai.ingest import ExpansionConfig
from goai.pipeline import build_graph, classify_graph
from goai.reviewer import multi_agent_review
from goai.scholarly import FixtureBackend
from goai.store import SEMANTIC_DISPLAY
from goai.synthesis import render_report, synthesize_path


def main() -> None:
    gateway = fixtures.fig2_gateway()
    backend = FixtureBackend(fixtures.fig2_network())
    config = ExpansionConfig(K=4, N=2, relevance_floor=0.0, topic=fixtures.TOPIC)

    store, delta, key_ref = build_graph(fixtures.TOPIC, config, backend)
    print(f"ingested {len(delta.added_papers)} papers around {key_ref}")
    classified = classify_graph(store, fixtures.fig2_sections(), gateway)
    print(f"classified {classified} citation relations\n")

    result = run_exploration(key_ref, fixtures.QUERY, width=fixtures.WIDTH,
                             max_depth=fixtures.DEPTH, store=store, gateway=gateway)
    print("trajectories:")
    for rank, path in enumerate(result.paths, start=1):
        hop = path.hops[-1]
        rel = f"({hop.position.section_label}, {SEMANTIC_DISPLAY[hop.semantics.label]})"
        print(f"  {rank}. {path.origin} -{rel} [{hop.direction}]-> {hop.to_entity}")

    bundle = synthesize_path(result.paths[0], store, gateway, fixtures.QUERY)
    print("\n" + render_report(bundle, result.paths[0], store))

    idea_text = fixtures.idea_to_text(bundle.idea.motivation, bundle.idea.novelty,
                                      bundle.idea.method)
    verdict = multi_agent_review(idea_text, "", gateway, agents=3)
    print(f"reviewer verdict: {verdict.decision} "
          f"({verdict.promising_votes}/{len(verdict.per_agent)} votes)")


if __name__ == "__main__":
    main()
