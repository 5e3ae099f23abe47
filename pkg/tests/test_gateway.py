import pytest
from hypothesis import given, settings, strategies as st

from goai import fixtures
from goai.errors import (
    GatewayUnavailableError,
    MissingPlaceholderError,
    ParseFailureError,
    ScriptMissError,
)
from goai.explorer import choice_values, init_beam, search_relations
from goai.gateway import (
    CompletionRequest,
    Gateway,
    PromptTemplate,
    RetryingBackend,
    ScriptedBackend,
    load_builtin_templates,
    parse_choice,
    prompt_digest,
    render,
)

TEMPLATE_NAMES = {
    "citation_classify", "relation_prune", "entity_prune", "trend", "hint_idea",
    "prereq_extract", "prereq_order", "review_stage", "path_validate",
}


class TestRender:
    def test_simple_substitution(self):
        t = PromptTemplate.from_body("t", 1, "hello {name}")
        assert render(t, {"name": "x"}) == "hello x"

    def test_missing_placeholder_named(self):
        t = PromptTemplate.from_body("t", 1, "{a} and {b}")
        with pytest.raises(MissingPlaceholderError) as err:
            render(t, {"a": "1"})
        assert err.value.names == ["b"]

    def test_extra_keys_ignored(self):
        t = PromptTemplate.from_body("t", 1, "only {a}")
        assert render(t, {"a": "1", "unused": "2"}) == "only 1"

    def test_value_braces_are_escaped(self):
        t = PromptTemplate.from_body("t", 1, "v={a}")
        assert render(t, {"a": "{x}"}) == "v={{x}}"

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=30), st.text(max_size=30))
    def test_no_unresolved_placeholder_after_render(self, a, b):
        t = PromptTemplate.from_body("t", 1, "A{a}B{b}C")
        out = render(t, {"a": a, "b": b})
        import re
        # strip doubled (escaped) braces, then no placeholder pattern remains
        stripped = out.replace("{{", "").replace("}}", "")
        assert not re.search(r"\{[a-zA-Z_][a-zA-Z0-9_]*\}", stripped)

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=20), st.text(max_size=20),
           st.text(max_size=20), st.text(max_size=20))
    def test_injective_across_brace_delimited_separator(self, a1, b1, a2, b2):
        # the separator's lone brace cannot be forged by values (theirs double)
        t = PromptTemplate.from_body("t", 1, "{a}|{|{b}")
        if render(t, {"a": a1, "b": b1}) == render(t, {"a": a2, "b": b2}):
            assert (a1, b1) == (a2, b2)

    def test_relation_prune_render_contains_candidates_verbatim(self, fig2_store):
        state = init_beam(fixtures.KEY_REF, fixtures.QUERY, 5, fig2_store)
        candidates, _ = search_relations(state, fig2_store)
        _keys, values = choice_values(fixtures.QUERY, candidates, 5)
        rendered = render(load_builtin_templates()["relation_prune"], values)
        for cand in candidates:
            assert f"({cand.section_label}," in rendered
            assert cand.display in rendered

    def test_checksums_stable_and_complete(self):
        templates = load_builtin_templates()
        assert set(templates) == TEMPLATE_NAMES
        gw = Gateway(ScriptedBackend(), templates)
        first = gw.template_checksums()
        assert first == gw.template_checksums()
        assert all(len(v) == 16 for v in first.values())


class TestScriptedBackend:
    def test_exact_lookup(self):
        backend = ScriptedBackend()
        backend.add("t", "prompt body", "canned")
        assert backend.complete("t", "prompt body", 0.0, 10) == "canned"

    def test_script_miss_is_fatal_and_named(self):
        backend = ScriptedBackend()
        with pytest.raises(ScriptMissError) as err:
            backend.complete("mytemplate", "unknown prompt", 0.0, 10)
        assert "mytemplate" in str(err.value)
        assert prompt_digest("mytemplate", "unknown prompt") in str(err.value)

    def test_save_load_round_trip(self, tmp_path):
        backend = ScriptedBackend()
        backend.add("t", "p1", "r1")
        backend.add("t", "p2", "r2")
        path = tmp_path / "s.script"
        backend.save(path)
        loaded = ScriptedBackend.load(path)
        assert loaded.complete("t", "p1", 0.0, 10) == "r1"
        assert loaded.complete("t", "p2", 0.0, 10) == "r2"

    def test_retry_wrapper_counts_attempts(self):
        class Flaky:
            backend_id = "flaky"

            def __init__(self):
                self.calls = 0

            def complete(self, template_name, rendered, temperature, max_tokens):
                self.calls += 1
                if self.calls < 3:
                    raise GatewayUnavailableError("down")
                return "finally"

        backend = RetryingBackend(Flaky(), max_attempts=4)
        assert backend.complete("t", "p", 0.0, 10) == "finally"
        assert backend.attempts_used == 3

    def test_retry_wrapper_exhausts(self):
        class Dead:
            backend_id = "dead"

            def complete(self, *a):
                raise GatewayUnavailableError("down")

        with pytest.raises(GatewayUnavailableError):
            RetryingBackend(Dead(), max_attempts=2).complete("t", "p", 0.0, 10)


class TestGatewayComplete:
    def test_response_carries_digest_and_backend(self):
        templates = {"t": PromptTemplate.from_body("t", 1, "ask {q}")}
        backend = ScriptedBackend()
        backend.add("t", "ask foo", "answer")
        gw = Gateway(backend, templates)
        resp = gw.complete(CompletionRequest("t", {"q": "foo"}))
        assert resp.text == "answer"
        assert resp.backend_id == "scripted"
        assert resp.digest == prompt_digest("t", "ask foo")

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest("t", {}, temperature=-0.1)


# hand-annotated before the parser was written; the parser must match it
CHOICE_CORPUS = [
    ("1. B\n2. A", ["A", "B", "C"], ["B", "A"]),
    ("D", ["A", "B", "C"], None),
    ("", ["A", "B", "C"], None),
    ("1. C2\n2. C1", None, ["C2", "C1"]),
    ("C1, C3", None, ["C1", "C3"]),
    ("I would rank them as follows:\n1. C3 because it is most relevant\n2. C1 is close",
     None, ["C3", "C1"]),
    ("The best option is C2.", None, ["C2"]),
    ("c3\nc2", None, ["C3", "C2"]),
    ("None of these are relevant.", None, None),
    ("1) C4\n2) C2\n3) C4", None, ["C4", "C2"]),
    ("C1 C2 C3", None, ["C1", "C2", "C3"]),
    ("- C5\n- C1", None, ["C5", "C1"]),
    ("Selected: C2; C4", None, ["C2", "C4"]),
    ("My ranking:\n\n1. C1\n\n2. C5\n", None, ["C1", "C5"]),
    ("「C3」", None, ["C3"]),
    ("C10 then C1 as backup", None, ["C10"]),
    ("2. C2\n1. C1", None, ["C2", "C1"]),
    ("C1\nC1\nC2", None, ["C1", "C2"]),
    ("**1. C4**\n**2. C5**", None, ["C4", "C5"]),
    ("1.C2 2.C1", None, ["C2", "C1"]),
    ("i'd go with option c2, though c5 is close", None, ["C2"]),
    ("Answer: C3", None, ["C3"]),
]

DEFAULT_ALLOWED = [f"C{i}" for i in range(1, 13)]


class TestParseChoice:
    @pytest.mark.parametrize("text,allowed,expected", CHOICE_CORPUS)
    def test_hand_annotated_corpus(self, text, allowed, expected):
        allowed = allowed or DEFAULT_ALLOWED
        if expected is None:
            with pytest.raises(ParseFailureError):
                parse_choice(text, allowed)
        else:
            assert parse_choice(text, allowed) == expected

    def test_empty_allowed_rejected(self):
        with pytest.raises(ValueError):
            parse_choice("A", [])

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=80))
    def test_never_returns_key_outside_allowed(self, text):
        allowed = ["C1", "C2", "C3"]
        try:
            chosen = parse_choice(text, allowed)
        except ParseFailureError:
            return
        assert chosen
        assert set(chosen) <= set(allowed)
        assert len(set(chosen)) == len(chosen)
