"""Shipped fixture world: a small citation graph around a tree-search paper.

Everything offline runs need lives here: the classified fixture graph, the
matching citation network for ingest, parsed sections for classification,
a scripted-gateway table covering every pipeline prompt, and synthetic
review-platform data.  The script builder drives the real search machinery
so its prompt digests always match what the pipeline renders.
"""

from __future__ import annotations

from pathlib import Path

from .citations import CitationMarker, SectionText, save_sections
from .explorer import (
    ExplorationPath,
    PartialPath,
    PathHop,
    choice_values,
    init_beam,
    search_entities,
    search_relations,
)
from .gateway import Gateway, PromptTemplate, ScriptedBackend, load_builtin_templates, render
from .records import write_records
from .reviewer import save_sft_dataset  # noqa: F401  (re-export for scripts)
from .scholarly import FixtureNetwork, ResponseCache
from .store import CitationPosition, CitationSemantics, GoAIQuad, PaperNode, PaperStore
from .synthesis import path_block

KEY_REF = "tree-of-thoughts"
QUERY = "How do tree search methods shape the reasoning ability of large language models?"
TOPIC = "LLM reasoning"
SEARCH_TOPIC = "tree search reasoning"
WIDTH = 5
DEPTH = 1

DEMO_IDEA = (
    "Blend inference-time tree search with preference-distilled training: run a small "
    "search over candidate reasoning branches only where a learned value head is "
    "uncertain, and distill the resolved branches back into the policy between tasks."
)

_PAPERS: list[tuple[str, str, str, int]] = [
    ("tree-of-thoughts", "Tree of Thoughts",
     "A deliberate problem-solving framework where a language model explores a tree of "
     "intermediate thoughts, evaluating branches and backtracking with search.", 2023),
    ("chain-of-thought", "Chain-of-Thought Prompting",
     "Prompting large language models to produce intermediate reasoning steps improves "
     "arithmetic, commonsense, and symbolic reasoning.", 2022),
    ("self-consistency", "Self-Consistency",
     "Samples diverse reasoning chains and returns the most consistent answer, "
     "marginalizing over sampled chains to improve accuracy.", 2022),
    ("cpo", "Chain of Preference Optimization",
     "Distills preferences from tree search into fine-tuning so chain reasoning inherits "
     "deliberate exploration without inference-time overhead.", 2024),
    ("diagram-of-thought", "Diagram of Thought",
     "Models iterative reasoning as a directed acyclic graph built within a single model, "
     "composing propositions, critiques, and refinements.", 2024),
    ("controlllm", "ControlLLM",
     "Lets language models use multimodal tools by searching over a task graph of tool "
     "capabilities.", 2023),
    ("react", "ReAct",
     "Interleaves reasoning traces and task actions so a language model can plan, act, "
     "and adjust from environment feedback.", 2022),
    ("reasoning-survey", "A Survey of Reasoning with Language Models",
     "Catalogues prompting, decoding, and search techniques for reasoning with large "
     "language models.", 2023),
    ("tot-extension-appendix", "Boosting Tree Search with Value Feedback",
     "Adds a learned value signal to guide branch expansion in search-based reasoning "
     "harnesses.", 2024),
]

# (citing, cited, heading, label, marker, paragraph)
_MENTIONS: list[tuple[str, str, str, str, str, str]] = [
    ("tree-of-thoughts", "chain-of-thought", "1 Introduction", "CA", "[2]",
     "Deliberate search over intermediate thoughts contrasts with linear prompting. "
     "Unlike chain-of-thought prompting [2], which commits to a single reasoning chain, "
     "our approach explores alternatives; acting frameworks such as ReAct [3] interleave "
     "reasoning with environment steps but do not search over thoughts."),
    ("tree-of-thoughts", "react", "1 Introduction", "CA", "[3]",
     "Deliberate search over intermediate thoughts contrasts with linear prompting. "
     "Unlike chain-of-thought prompting [2], which commits to a single reasoning chain, "
     "our approach explores alternatives; acting frameworks such as ReAct [3] interleave "
     "reasoning with environment steps but do not search over thoughts."),
    ("tree-of-thoughts", "self-consistency", "2 Background", "BE", "[4]",
     "We build on self-consistency [4], which samples diverse chains and aggregates "
     "answers; we extend its sampling view to deliberate tree expansion with lookahead "
     "and backtracking."),
    ("tree-of-thoughts", "reasoning-survey", "5 Related Work", "MI", "[5]",
     "A broad survey of reasoning methods [5] catalogues prompting techniques; we point "
     "readers there for history."),
    ("cpo", "tree-of-thoughts", "1 Introduction", "CA", "[1]",
     "Tree search at inference time, as in Tree of Thoughts [1], improves reasoning but "
     "is costly; we compare against it and instead distill search preferences into "
     "training as an alternative route."),
    ("diagram-of-thought", "tree-of-thoughts", "1 Introduction", "BE", "[1]",
     "We are inspired by Tree of Thoughts [1] and extend branching exploration into a "
     "directed acyclic graph constructed within a single model."),
    ("controlllm", "tree-of-thoughts", "1 Introduction", "BE", "[1]",
     "Our tool-use planner builds on the search-over-thoughts idea of Tree of Thoughts "
     "[1], applying it to task graphs of tool capabilities."),
    ("tot-extension-appendix", "tree-of-thoughts", "A Appendix", "SS", "[1]",
     "Additional experiments reuse the search harness of Tree of Thoughts [1] to verify "
     "value feedback under identical settings."),
]

_HEADING_LABEL = {
    "1 Introduction": "Introduction",
    "2 Background": "Background",
    "5 Related Work": "RelatedWork",
    "A Appendix": "Appendix",
}

_CLASSIFY_REPLIES = {
    "BE": "B&E — the citing work is inspired by and extends the cited method.",
    "SS": "S&S — the citing work reuses the cited setup in support of its claims.",
    "CA": "C&A — the citing work compares itself against the cited approach.",
    "QR": "Q&R — the citing work disputes the cited result.",
    "MI": "M/I — only a passing pointer with no substantive relation.",
}

#: paper id -> prerequisite-extraction reply
_PREREQS = {
    "tree-of-thoughts": "- tree search | concept\n- backtracking | skill",
    "chain-of-thought": "- prompt engineering | skill\n- chain-of-thought prompting | concept",
    "self-consistency": "- sampling strategies | concept\n- majority answer aggregation | skill",
    "cpo": "- preference optimization | concept\n- supervised fine-tuning | skill",
    "diagram-of-thought": "- directed acyclic graphs | concept\n- iterative refinement | skill",
    "controlllm": "- tool use | concept\n- task graphs | concept",
    "react": "- agent loops | concept\n- action grounding | skill",
}

#: final-hop paper id -> (narrative, directions, motivation, novelty, method)
_SYNTHESIS = {
    "self-consistency": (
        "Sampling-based answer aggregation matured into deliberate tree expansion: "
        "voting over sampled chains became structured exploration of intermediate thoughts.",
        ["adaptive sampling budgets guided by branch value estimates",
         "unifying vote aggregation with tree pruning"],
        "Sampling many chains wastes budget on easy cases while search helps hard ones.",
        "A single controller that switches between voting and tree expansion per problem.",
        "Estimate answer entropy from a cheap sample, then escalate to tree search only "
        "above an uncertainty threshold.",
    ),
    "chain-of-thought": (
        "Linear chains of intermediate steps were generalized into branching deliberate "
        "search over thoughts, trading tokens for systematic exploration.",
        ["budget-aware switching between chains and trees",
         "learned step evaluators reusable across tasks"],
        "Chain prompting is cheap but brittle on problems needing lookahead.",
        "A per-step critic that decides when a chain should branch.",
        "Train a lightweight scorer on branch outcomes and gate tree expansion with it.",
    ),
    "cpo": (
        "Inference-time search was folded back into training: preferences distilled from "
        "explored branches teach the base model to reason as if it had searched.",
        ["distilling search traces into curriculum order",
         "preference data quality filters from branch statistics"],
        "Search quality is bottlenecked by the cost of exploring at every query.",
        "Amortizing tree search into the policy through branch-level preferences.",
        "Collect branch preference pairs during periodic search runs and fine-tune between "
        "deployments.",
    ),
    "diagram-of-thought": (
        "Tree-shaped exploration loosened into directed acyclic graphs, letting critiques "
        "and refinements merge branches instead of only splitting them.",
        ["graph-structured value propagation across merged branches",
         "compact serialization of reasoning graphs for replay"],
        "Trees duplicate shared sub-derivations that a graph could reuse.",
        "Merging equivalent reasoning states during exploration.",
        "Hash intermediate states, merge on collision, and propagate scores over the DAG.",
    ),
    "controlllm": (
        "Search over thoughts was applied to tool orchestration: branch expansion chooses "
        "tool-call sequences on a capability graph.",
        ["joint search over thoughts and tool calls",
         "cost-sensitive pruning for expensive tools"],
        "Tool pipelines fail when a single greedy plan hits a dead end.",
        "Treating tool plans as searchable branches with rollback.",
        "Expand candidate tool sequences on the task graph and prune with execution "
        "feedback.",
    ),
}

_REVIEW_SCORES = {"hint": (7, 8, 6), "demo": (6, 7, 4)}
_VALIDATE_SCORES = (7, 8, 6)


def fig2_papers() -> list[PaperNode]:
    return [
        PaperNode(id=pid, title=title, abstract=abstract, year=year, source="fixture")
        for pid, title, abstract, year in _PAPERS
    ]


def fig2_store() -> PaperStore:
    """The classified fixture graph (what ingest + classify produces)."""
    store = PaperStore()
    for paper in fig2_papers():
        store.add_paper(paper)
    for citing, cited, heading, label, _marker, paragraph in _MENTIONS:
        store.add_quad(GoAIQuad(
            citing=citing,
            position=CitationPosition(_HEADING_LABEL[heading], heading),
            semantics=CitationSemantics(label, paragraph, 1.0),
            cited=cited,
        ))
    return store


def fig2_network() -> FixtureNetwork:
    """The same world as a raw citation network for ingest."""
    net = FixtureNetwork()
    for paper in fig2_papers():
        net.add(paper, refs=[], citers=[])
    for citing, cited, _h, _l, _m, _p in _MENTIONS:
        net.link(citing, cited)
    net.topic_hits[TOPIC] = [KEY_REF]
    net.topic_hits[SEARCH_TOPIC] = [KEY_REF]
    return net


def fig2_sections() -> list[SectionText]:
    grouped: dict[tuple[str, str], dict] = {}
    for citing, cited, heading, _label, marker, paragraph in _MENTIONS:
        g = grouped.setdefault((citing, heading), {"paragraphs": [], "markers": []})
        if paragraph not in g["paragraphs"]:
            g["paragraphs"].append(paragraph)
        idx = g["paragraphs"].index(paragraph)
        start = paragraph.index(marker)
        g["markers"].append(CitationMarker(
            marker=marker, resolved_paper_id=cited,
            paragraph_index=idx, char_span=(start, start + len(marker)),
        ))
    return [
        SectionText(paper_id=citing, heading=heading,
                    paragraphs=tuple(g["paragraphs"]),
                    citation_markers=tuple(g["markers"]))
        for (citing, heading), g in sorted(grouped.items())
    ]


def fig2_expected_endpoints() -> list[tuple[str, str, str]]:
    """The five kept trajectories as (section label, semantics label, entity)."""
    return [
        ("Background", "BE", "self-consistency"),
        ("Introduction", "CA", "chain-of-thought"),
        ("Introduction", "CA", "cpo"),
        ("Introduction", "BE", "diagram-of-thought"),
        ("Introduction", "BE", "controlllm"),
    ]


def fig2_expected_paths(store: PaperStore | None = None) -> list[ExplorationPath]:
    store = store or fig2_store()
    directions = {"self-consistency": "backward", "chain-of-thought": "backward",
                  "cpo": "forward", "diagram-of-thought": "forward",
                  "controlllm": "forward"}
    paths = []
    for rank, (section, label, entity) in enumerate(fig2_expected_endpoints(), start=1):
        if directions[entity] == "backward":
            quad = next(q for q in store.quads()
                        if q.citing == KEY_REF and q.cited == entity
                        and q.position.section_label == section
                        and q.semantics.label == label)
        else:
            quad = next(q for q in store.quads()
                        if q.cited == KEY_REF and q.citing == entity
                        and q.position.section_label == section
                        and q.semantics.label == label)
        hop = PathHop(from_entity=KEY_REF, position=quad.position,
                      semantics=quad.semantics, to_entity=entity,
                      direction=directions[entity])
        paths.append(ExplorationPath(origin=KEY_REF, hops=(hop,),
                                     score_trace=((1, rank),)))
    return paths


def idea_to_text(motivation: str, novelty: str, method: str) -> str:
    return f"Motivation: {motivation}\nNovelty: {novelty}\nMethod: {method}"


def _staged_reply(summary: str, strengths: str, weaknesses: str, score: int) -> str:
    return (f"<Summary>{summary}</Summary>\n"
            f"<Analysis>Strengths: {strengths} Weaknesses: {weaknesses}</Analysis>\n"
            f"<Score>{score}</Score>")


def build_script(templates: dict[str, PromptTemplate] | None = None) -> ScriptedBackend:
    """A scripted backend covering every prompt the fixture pipeline renders."""
    templates = templates or load_builtin_templates()
    script = ScriptedBackend()
    store = fig2_store()

    def add(name: str, values: dict[str, str], response: str) -> None:
        script.add(name, render(templates[name], values), response)

    # citation classification, one entry per mention
    for citing, cited, heading, label, _marker, paragraph in _MENTIONS:
        titles = {p.id: p.title for p in store.papers()}
        add("citation_classify", {
            "citing_title": titles[citing],
            "cited_title": titles[cited],
            "section": _HEADING_LABEL[heading],
            "context": paragraph,
        }, _CLASSIFY_REPLIES[label])

    # exploration prunes, driven through the real search steps; entries are
    # added for the standard query and for the bare-CLI default (key title)
    state = init_beam(KEY_REF, QUERY, WIDTH, store)
    rel_cands, _finished = search_relations(state, store)
    chosen_rel = [i for i, c in enumerate(rel_cands)
                  if (c.section_label, c.semantics_label) in
                  {("Background", "BE"), ("Introduction", "CA"), ("Introduction", "BE")}]
    order = {("Background", "BE", "backward"): 0, ("Introduction", "CA", "backward"): 1,
             ("Introduction", "CA", "forward"): 2, ("Introduction", "BE", "forward"): 3}
    chosen_rel.sort(key=lambda i: order[(rel_cands[i].section_label,
                                         rel_cands[i].semantics_label,
                                         rel_cands[i].direction)])
    partials = [PartialPath(base=rel_cands[i].base, candidate=rel_cands[i])
                for i in chosen_rel]
    path_cands = search_entities(partials, store)
    want = {entity: n for n, (_s, _l, entity) in enumerate(fig2_expected_endpoints())}
    chosen_ent = [i for i, c in enumerate(path_cands) if c.hop.to_entity in want]
    chosen_ent.sort(key=lambda i: want[path_cands[i].hop.to_entity])

    for query in (QUERY, store.get_paper(KEY_REF).title):
        keys, values = choice_values(query, rel_cands, WIDTH)
        add("relation_prune", values,
            "\n".join(f"{n}. {keys[i]}" for n, i in enumerate(chosen_rel, start=1)))
        keys, values = choice_values(query, path_cands, WIDTH)
        add("entity_prune", values,
            "\n".join(f"{n}. {keys[i]}" for n, i in enumerate(chosen_ent, start=1)))

    # synthesis per expected path
    for path in fig2_expected_paths(store):
        entity = path.hops[-1].to_entity
        narrative, directions, motivation, novelty, method = _SYNTHESIS[entity]
        block = path_block(path, store)
        add("trend", {"query": QUERY, "path_block": block},
            f"<Narrative>{narrative}</Narrative>\n<Directions>\n"
            + "\n".join(f"- {d}" for d in directions) + "\n</Directions>")
        add("hint_idea", {"trend_narrative": narrative, "path_block": block},
            f"<Motivation>{motivation}</Motivation>\n<Novelty>{novelty}</Novelty>\n"
            f"<Method>{method}</Method>")

        # per-paper extraction plus one ordering call
        items: list[tuple[str, str, str]] = []
        for pid in path.entities():
            paper = store.get_paper(pid)
            add("prereq_extract", {"title": paper.title, "abstract": paper.abstract},
                _PREREQS[pid])
            for line in _PREREQS[pid].splitlines():
                name, _, kind = line.lstrip("- ").partition("|")
                items.append((name.strip(), kind.strip(), pid))
        item_keys = [f"P{i + 1}" for i in range(len(items))]
        items_block = "\n".join(
            f"{k}: {name} ({kind}, from: {store.get_paper(pid).title})"
            for k, (name, kind, pid) in zip(item_keys, items))
        # the non-origin paper's items are the simpler, earlier material
        ordering = item_keys[2:] + item_keys[:2]
        add("prereq_order", {"items_block": items_block},
            "\n".join(f"{n}. {k}" for n, k in enumerate(ordering, start=1)))

        # staged review of the scripted hint idea
        idea_text = idea_to_text(motivation, novelty, method)
        for agent_idx, score in enumerate(_REVIEW_SCORES["hint"], start=1):
            add("review_stage", {"idea": idea_text, "abstract": "", "agent_id": f"a{agent_idx}"},
                _staged_reply(f"Proposes: {novelty}",
                              "clear continuation of the trajectory.",
                              "evaluation plan is thin.", score))

        # learning-path validation (all agents approve)
        ordered = [items[item_keys.index(k)] for k in ordering]
        vi_block = "\n".join(f"{n}. {name} [{kind}]"
                             for n, (name, kind, _pid) in enumerate(ordered, start=1))
        source_ids = list(dict.fromkeys(pid for _n, _k, pid in ordered))
        papers_block = "\n".join(
            f"- {store.get_paper(pid).title}: {store.get_paper(pid).abstract}"
            for pid in source_ids)
        for agent_idx, score in enumerate(_VALIDATE_SCORES, start=1):
            add("path_validate", {"items_block": vi_block, "papers_block": papers_block,
                                  "agent_id": f"a{agent_idx}"},
                _staged_reply("prerequisites for search-based reasoning",
                              "complete and well ordered.", "none noted.", score)
                + "\n<Edits>\nkeep 1\n</Edits>")

    # the interactive demo idea submitted through the studio
    for agent_idx, score in enumerate(_REVIEW_SCORES["demo"], start=1):
        add("review_stage", {"idea": DEMO_IDEA, "abstract": "", "agent_id": f"a{agent_idx}"},
            _staged_reply("Uncertainty-gated tree search with periodic distillation.",
                          "practical compute/quality trade-off.",
                          "uncertainty calibration is unproven.", score))

    return script


def fig2_gateway(templates: dict[str, PromptTemplate] | None = None) -> Gateway:
    return Gateway(build_script(templates), templates or load_builtin_templates())


# --- synthetic review dump -----------------------------------------------------

def sft_dump(n: int = 50, incomplete: int = 0) -> list[dict]:
    """n complete review records plus optional records with missing fields."""
    out = []
    for i in range(1, n + 1):
        venue = "ICLR" if i % 2 else "NeurIPS"
        year = 2022 + (i % 4)
        out.append({
            "paper_id": f"p{i:03d}",
            "abstract": f"Abstract text for synthetic submission {i}.",
            "summary of the paper": f"Studies synthetic problem {i} with a learned model.",
            "strengths and weaknesses": (
                f"Strengths: solid baseline coverage for problem {i}. "
                f"Weaknesses: limited ablations."),
            "technical novelty and significance": f"{(i % 4) + 1}: incremental but sound.",
            "venue": venue,
            "year": year,
        })
    missing_fields = ["technical novelty and significance", "summary of the paper",
                      "abstract", "strengths and weaknesses"]
    for j in range(incomplete):
        rec = dict(out[j % n])
        rec["paper_id"] = f"x{j:03d}"
        rec.pop(missing_fields[j % len(missing_fields)], None)
        out.append(rec)
    return out


def correlation_pairs() -> list[dict]:
    model = [6, 7, 4, 8, 5, 9, 3, 7]
    human = [5, 8, 4, 7, 6, 9, 2, 6]
    return [{"kind": "pair", "model_score": m, "human_score": h}
            for m, h in zip(model, human)]


def write_recorded_search_cache(path: str | Path, topic: str = "prompting strategies",
                                limit: int = 5) -> list[str]:
    """Cache file with a 7-hit recorded search payload; returns the hit ids."""
    papers = fig2_papers()[:7]
    payload = {"data": [
        {"paperId": p.id, "title": p.title, "abstract": p.abstract,
         "authors": [], "year": p.year, "venue": p.venue, "url": p.url}
        for p in papers
    ]}
    cache = ResponseCache(path)
    key = ResponseCache.request_key(
        "search", path="/paper/search",
        query=topic, limit=limit,
        fields="title,abstract,authors,year,venue,externalIds,url")
    cache.put(key, payload)
    return [p.id for p in papers]


# --- fixture directory ------------------------------------------------------------

def write_fixture_dir(target: str | Path) -> dict[str, Path]:
    """Materialize every fixture artifact under one directory."""
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    paths = {
        "snapshot": target / "fig2.snapshot",
        "network": target / "fig2.network.jsonl",
        "sections": target / "fig2.sections.jsonl",
        "script": target / "fig2.script",
        "sft_dump": target / "sft_dump.jsonl",
        "sft_dump_dirty": target / "sft_dump_dirty.jsonl",
        "pairs": target / "pairs.jsonl",
    }
    fig2_store().save(paths["snapshot"])
    fig2_network().save(paths["network"])
    save_sections(paths["sections"], fig2_sections())
    build_script().save(paths["script"])
    write_records(paths["sft_dump"], [{"kind": "review_dump", **r} for r in sft_dump(50)])
    write_records(paths["sft_dump_dirty"],
                  [{"kind": "review_dump", **r} for r in sft_dump(50, incomplete=6)])
    write_records(paths["pairs"], correlation_pairs())
    return paths
