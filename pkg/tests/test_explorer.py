import random

import pytest
from hypothesis import given, settings, strategies as st

from goai import fixtures
from goai.errors import (
    GatewayUnavailableError,
    InvalidConfigError,
    UnknownEntityError,
)
from goai.explorer import (
    AdditiveRanker,
    ExplorationPath,
    LlmRanker,
    PartialPath,
    choice_values,
    init_beam,
    prune_entities,
    prune_relations,
    replay_trace,
    run_exploration,
    save_paths,
    search_entities,
    search_relations,
)
from goai.gateway import Gateway, ScriptedBackend, load_builtin_templates, render
from goai.store import PaperStore

from util import (
    additive_score,
    enumerate_simple_paths,
    make_paper,
    make_quad,
    random_graph_store,
)


class SentinelBackend:
    """Any completion call is a test failure."""

    backend_id = "sentinel"

    def complete(self, *args):
        raise AssertionError("gateway must not be called here")


def sentinel_gateway():
    return Gateway(SentinelBackend(), load_builtin_templates())


class DeadBackend:
    backend_id = "dead"

    def complete(self, *args):
        raise GatewayUnavailableError("gateway down")


class TestInitBeam:
    def test_single_zero_hop_path(self, fig2_store):
        state = init_beam("tree-of-thoughts", "q", 5, fig2_store)
        assert len(state.paths) == 1
        assert state.frontier_entities == {"tree-of-thoughts"}
        assert state.iteration == 0
        assert state.paths[0].element_length() == 1

    def test_zero_width_rejected(self, fig2_store):
        with pytest.raises(InvalidConfigError):
            init_beam("tree-of-thoughts", "q", 0, fig2_store)

    def test_unknown_key_reference(self, fig2_store):
        with pytest.raises(UnknownEntityError):
            init_beam("ghost", "q", 3, fig2_store)

    def test_isolated_node_halts_with_origin_path(self):
        store = PaperStore()
        store.add_paper(make_paper("alone"))
        result = run_exploration("alone", "q", 3, 2, store, gateway=sentinel_gateway())
        assert [p.hops for p in result.paths] == [()]
        assert result.iterations_completed == 0


class TestSearchRelations:
    def test_figure2_candidates_match_full_scan(self, fig2_store):
        state = init_beam("tree-of-thoughts", "q", 5, fig2_store)
        candidates, finished = search_relations(state, fig2_store)
        assert finished == []
        got = {(c.section_label, c.semantics_label, c.direction) for c in candidates}
        # independent scan over all stored quads touching the endpoint
        expected = set()
        for quad in fig2_store.quads():
            if quad.citing == "tree-of-thoughts":
                expected.add((quad.position.section_label, quad.semantics.label,
                              "backward"))
            if quad.cited == "tree-of-thoughts":
                expected.add((quad.position.section_label, quad.semantics.label,
                              "forward"))
        assert got == expected
        pair_set = {(c.section_label, c.semantics_label) for c in candidates}
        assert {("Background", "BE"), ("Introduction", "CA"),
                ("Introduction", "BE")} <= pair_set

    def test_exhausted_endpoint_is_finished(self):
        store = PaperStore()
        for pid in ("a", "b"):
            store.add_paper(make_paper(pid))
        store.add_quad(make_quad("a", "b"))
        state = init_beam("a", "q", 3, store)
        candidates, _ = search_relations(state, store)
        partials = [PartialPath(base=candidates[0].base, candidate=candidates[0])]
        new_state = prune_entities(state, search_entities(partials, store),
                                   AdditiveRanker({}))
        # endpoint b has only the edge back to a, which is on the path
        candidates, finished = search_relations(new_state, store)
        assert candidates == []
        assert [p.endpoint() for p in finished] == ["b"]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_candidates_equal_incident_scan_minus_path(self, seed):
        store, origin, weights = random_graph_store(random.Random(seed),
                                                    max_nodes=12, max_edges=30)
        result = run_exploration(origin, "q", 3, 2, store,
                                 ranker=AdditiveRanker(weights))
        for path in result.paths:
            visited = set(path.entities())
            cands, _ = search_relations(
                type("S", (), {"paths": [path], "iteration": 0})(), store)
            for cand in cands:
                for quad in cand.target_quads:
                    far = quad.cited if cand.direction == "backward" else quad.citing
                    assert far not in visited


class TestPruneRelations:
    def test_figure2_scripted_keeps_paper_relations(self, fig2_store, fig2_gateway):
        state = init_beam(fixtures.KEY_REF, fixtures.QUERY, 5, fig2_store)
        candidates, _ = search_relations(state, fig2_store)
        assert len(candidates) == 6  # noise relations force a real prune
        partials = prune_relations(state, candidates, LlmRanker(fig2_gateway))
        kept_pairs = {(p.candidate.section_label, p.candidate.semantics_label)
                      for p in partials}
        assert kept_pairs == {("Background", "BE"), ("Introduction", "CA"),
                              ("Introduction", "BE")}

    def test_vacuous_prune_skips_gateway(self):
        store = PaperStore()
        for pid in ("a", "b"):
            store.add_paper(make_paper(pid))
        store.add_quad(make_quad("a", "b"))
        state = init_beam("a", "q", 5, store)
        candidates, _ = search_relations(state, store)
        partials = prune_relations(state, candidates, LlmRanker(sentinel_gateway()))
        assert len(partials) == 1

    def test_scripted_permutation_of_eight_keeps_top_three(self):
        store = PaperStore()
        store.add_paper(make_paper("hub"))
        sections = ("Introduction", "Background", "Method", "Experiments",
                    "Discussion", "Conclusion", "RelatedWork", "Appendix")
        for i, section in enumerate(sections):
            store.add_paper(make_paper(f"n{i}"))
            store.add_quad(make_quad("hub", f"n{i}", section=section))
        state = init_beam("hub", "query text", 3, store)
        candidates, _ = search_relations(state, store)
        assert len(candidates) == 8
        keys, values = choice_values("query text", candidates, 3)
        backend = ScriptedBackend()
        templates = load_builtin_templates()
        backend.add("relation_prune", render(templates["relation_prune"], values),
                    "1. C7\n2. C2\n3. C5")
        partials = prune_relations(state, candidates,
                                   LlmRanker(Gateway(backend, templates)))
        picked = [p.candidate for p in partials]
        assert picked == [candidates[6], candidates[1], candidates[4]]

    def test_parse_failure_falls_back_to_lexical_similarity(self):
        store = PaperStore()
        store.add_paper(make_paper("hub"))
        for i in range(4):
            store.add_paper(make_paper(f"n{i}"))
        evidences = ["zebra words", "query terms overlap strongly", "meh", "also meh"]
        sections = ("Introduction", "Background", "Method", "Experiments")
        for i in range(4):
            store.add_quad(make_quad("hub", f"n{i}", section=sections[i],
                                     evidence=evidences[i]))
        state = init_beam("hub", "query terms overlap", 2, store)
        candidates, _ = search_relations(state, store)

        class Garbage:
            backend_id = "garbage"

            def complete(self, *a):
                return "utterly unusable reply"

        partials = prune_relations(state, candidates,
                                   LlmRanker(Gateway(Garbage(),
                                                     load_builtin_templates())))
        assert len(partials) == 2
        best = partials[0].candidate
        assert best.target_quads[0].semantics.evidence == "query terms overlap strongly"


class TestSearchEntities:
    def test_figure2_candidate_entities_superset(self, fig2_store, fig2_gateway):
        state = init_beam(fixtures.KEY_REF, fixtures.QUERY, 5, fig2_store)
        candidates, _ = search_relations(state, fig2_store)
        partials = prune_relations(state, candidates, LlmRanker(fig2_gateway))
        path_cands = search_entities(partials, fig2_store)
        entities = {c.hop.to_entity for c in path_cands}
        assert {"self-consistency", "chain-of-thought", "cpo",
                "diagram-of-thought", "controlllm"} <= entities

    def test_on_path_entities_excluded(self):
        store = PaperStore()
        for pid in ("a", "b", "c"):
            store.add_paper(make_paper(pid))
        store.add_quad(make_quad("a", "b"))
        store.add_quad(make_quad("b", "a", section="Method"))
        store.add_quad(make_quad("b", "c"))
        result = run_exploration("a", "q", 5, 2, store, ranker=AdditiveRanker({}))
        for path in result.paths:
            entities = path.entities()
            assert len(entities) == len(set(entities))
        # both first-hop directions reach b, then the only continuation is c
        two_hop = [p for p in result.paths if len(p.hops) == 2]
        assert len(two_hop) == 2  # backward (a cites b) and forward (b cites a)
        assert all(p.entities() == ["a", "b", "c"] for p in two_hop)


class TestPruneEntities:
    def test_single_candidate_kept_without_gateway(self):
        store = PaperStore()
        for pid in ("a", "b"):
            store.add_paper(make_paper(pid))
        store.add_quad(make_quad("a", "b"))
        result = run_exploration("a", "q", 5, 1, store, gateway=sentinel_gateway())
        assert [p.endpoint() for p in result.paths] == ["b"]

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_kept_is_min_width_candidates(self, seed, width):
        store, origin, weights = random_graph_store(random.Random(seed),
                                                    max_nodes=10, max_edges=24)
        state = init_beam(origin, "q", width, store)
        candidates, _ = search_relations(state, store)
        if not candidates:
            return
        ranker = AdditiveRanker(weights)
        partials = prune_relations(state, candidates, ranker)
        path_cands = search_entities(partials, store)
        new_state = prune_entities(state, path_cands, ranker)
        assert len(new_state.paths) == min(width, len(path_cands))
        kept_fps = {p.fingerprint() for p in new_state.paths}
        cand_fps = {c.path.fingerprint() for c in path_cands}
        assert kept_fps <= cand_fps
        assert new_state.iteration == 1


class TestRunExploration:
    def test_figure2_replay_exact_paths(self, fig2_store, fig2_gateway):
        result = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 5, 1,
                                 fig2_store, gateway=fig2_gateway)
        got = [(p.hops[-1].position.section_label, p.hops[-1].semantics.label,
                p.hops[-1].to_entity) for p in result.paths]
        assert got == fixtures.fig2_expected_endpoints()
        assert not result.truncated

    def test_figure2_growth_law_one_hop_per_iteration(self, fig2_store, fig2_gateway):
        result = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 5, 1,
                                 fig2_store, gateway=fig2_gateway)
        for path in result.paths:
            assert len(path.hops) == 1
            assert path.element_length() == 3  # grew by 2 over the origin

    def test_depth_zero_returns_origin_only(self, fig2_store):
        result = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 5, 0,
                                 fig2_store, gateway=sentinel_gateway())
        assert [p.hops for p in result.paths] == [()]

    def test_byte_identical_across_runs(self, fig2_store, fig2_gateway, tmp_path):
        outs = []
        for i in range(2):
            result = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 5, 1,
                                     fig2_store, gateway=fig2_gateway)
            out = tmp_path / f"paths{i}.jsonl"
            save_paths(out, result.paths)
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_gateway_exhaustion_returns_truncated_partial(self, fig2_store):
        result = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 2, 1, fig2_store,
                                 gateway=Gateway(DeadBackend(),
                                                 load_builtin_templates()))
        assert result.truncated
        assert result.paths == [] or all(not p.hops for p in result.paths)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_simple_path_and_directionality_invariants(self, seed):
        store, origin, weights = random_graph_store(random.Random(seed),
                                                    max_nodes=14, max_edges=40)
        result = run_exploration(origin, "q", 4, 3, store,
                                 ranker=AdditiveRanker(weights))
        quad_keys = {q.key() for q in store.quads()}
        for path in result.paths:
            entities = path.entities()
            assert len(entities) == len(set(entities))
            for hop in path.hops:
                assert hop.quad_key() in quad_keys
            for left, right in zip(path.hops, path.hops[1:]):
                assert left.to_entity == right.from_entity


class TestBeamVsExhaustive:
    def _oracle(self, store, origin, weights, depth):
        paths = enumerate_simple_paths(store, origin, depth)
        scored = [(additive_score(p, store, weights), p.fingerprint(), p)
                  for p in paths]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return scored

    @pytest.mark.parametrize("seed", range(8))
    def test_unlimited_width_equals_enumeration(self, seed):
        store, origin, weights = random_graph_store(random.Random(seed),
                                                    max_nodes=12, max_edges=30)
        depth = 3
        oracle = self._oracle(store, origin, weights, depth)
        result = run_exploration(origin, "q", max(len(oracle), 1) + 5, depth, store,
                                 ranker=AdditiveRanker(weights))
        assert ({p.fingerprint() for p in result.paths}
                == {fp for _s, fp, _p in oracle})

    @pytest.mark.parametrize("seed", range(8))
    def test_width_three_equals_exhaustive_top_three(self, seed):
        store, origin, weights = random_graph_store(random.Random(seed + 100),
                                                    max_nodes=12, max_edges=30)
        depth = 3
        oracle = self._oracle(store, origin, weights, depth)
        result = run_exploration(origin, "q", 3, depth, store,
                                 ranker=AdditiveRanker(weights))
        assert ([p.fingerprint() for p in result.paths]
                == [fp for _s, fp, _p in oracle[:3]])


class TestTraceReplay:
    def test_replay_reproduces_scripted_run(self, fig2_store, fig2_gateway, tmp_path):
        trace = tmp_path / "run.trace"
        original = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 5, 1,
                                   fig2_store, gateway=fig2_gateway,
                                   trace_path=trace)
        replayed = replay_trace(trace, fig2_store)
        save_paths(tmp_path / "a.jsonl", original.paths)
        save_paths(tmp_path / "b.jsonl", replayed.paths)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_replay_reproduces_additive_run(self, tmp_path):
        store, origin, weights = random_graph_store(random.Random(42),
                                                    max_nodes=12, max_edges=30)
        trace = tmp_path / "run.trace"
        original = run_exploration(origin, "q", 3, 3, store,
                                   ranker=AdditiveRanker(weights), trace_path=trace)
        replayed = replay_trace(trace, store)
        assert ([p.fingerprint() for p in replayed.paths]
                == [p.fingerprint() for p in original.paths])
        assert [p.sort_value for p in replayed.paths] == [p.sort_value
                                                          for p in original.paths]


def test_score_trace_records_iteration_and_rank(fig2_store, fig2_gateway):
    result = run_exploration(fixtures.KEY_REF, fixtures.QUERY, 5, 1,
                             fig2_store, gateway=fig2_gateway)
    assert [p.score_trace for p in result.paths] == [
        ((1, 1),), ((1, 2),), ((1, 3),), ((1, 4),), ((1, 5),)]
