"""Turning exploration paths into trends, hint ideas, and learning paths.

Each product is generated per path and keyed by the path fingerprint.
Outputs use the same closed tag style as the reviewer so a single parser
covers all structured completions.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import EmptyOutputError, InvalidConfigError
from .explorer import ExplorationPath
from .gateway import PARSE_RETRIES, CompletionRequest, Gateway, extract_tag
from .records import read_records, write_records
from .store import PaperStore, SEMANTIC_DISPLAY

log = logging.getLogger(__name__)

ITEM_KINDS = ("concept", "skill", "tool")

_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*(.+)$")


@dataclass(frozen=True)
class Trend:
    path_fingerprint: str
    narrative: str
    predicted_directions: tuple[str, ...]


@dataclass(frozen=True)
class HintIdea:
    motivation: str
    novelty: str
    method: str
    source_path: str


@dataclass(frozen=True)
class LearningItem:
    name: str
    kind: str  # concept | skill | tool
    source_paper: str
    complexity_rank: int


@dataclass(frozen=True)
class LearningPath:
    source_path: str
    items: tuple[LearningItem, ...]

    def validate(self) -> None:
        ranks = [it.complexity_rank for it in self.items]
        if ranks != sorted(ranks) or len(set(ranks)) != len(ranks):
            raise InvalidConfigError("complexity ranks must be strictly increasing")


@dataclass(frozen=True)
class SynthesisBundle:
    trend: Trend
    idea: HintIdea
    curriculum: LearningPath


def path_block(path: ExplorationPath, store: PaperStore) -> str:
    """One block per hop: both papers with abstracts plus the relation between them."""
    blocks = []
    for i, hop in enumerate(path.hops, start=1):
        src = store.get_paper(hop.from_entity)
        dst = store.get_paper(hop.to_entity)
        rel = f"({hop.position.section_label}, {SEMANTIC_DISPLAY[hop.semantics.label]})"
        blocks.append(
            f"Hop {i} [{hop.direction}] relation {rel}\n"
            f"  Paper A: {src.title}\n  Abstract A: {src.abstract}\n"
            f"  Paper B: {dst.title}\n  Abstract B: {dst.abstract}"
        )
    return "\n".join(blocks)


def summarize_trend(path: ExplorationPath, store: PaperStore, gateway: Gateway,
                    query: str = "") -> Trend:
    if not path.hops:
        raise InvalidConfigError("trend synthesis needs a path with at least one hop")
    request = CompletionRequest(
        template_name="trend",
        values={"query": query, "path_block": path_block(path, store)},
    )
    for _attempt in range(PARSE_RETRIES):
        response = gateway.complete(request)
        narrative = extract_tag(response.text, "Narrative")
        directions = extract_tag(response.text, "Directions")
        if narrative and narrative[0]:
            bullets = tuple(_parse_bullets(directions[0])) if directions else ()
            return Trend(path_fingerprint=path.fingerprint(),
                         narrative=narrative[0], predicted_directions=bullets)
    raise EmptyOutputError("trend output missing a usable <Narrative> block")


def generate_hint_idea(path: ExplorationPath, trend: Trend, store: PaperStore,
                       gateway: Gateway) -> HintIdea:
    if trend.path_fingerprint != path.fingerprint():
        raise InvalidConfigError("trend does not belong to this path")
    request = CompletionRequest(
        template_name="hint_idea",
        values={"trend_narrative": trend.narrative,
                "path_block": path_block(path, store)},
    )
    for _attempt in range(PARSE_RETRIES):
        response = gateway.complete(request)
        parts = [extract_tag(response.text, tag) for tag in ("Motivation", "Novelty", "Method")]
        if all(p and p[0] for p in parts):
            return HintIdea(motivation=parts[0][0], novelty=parts[1][0],
                            method=parts[2][0], source_path=path.fingerprint())
    raise EmptyOutputError("hint idea output missing one of Motivation/Novelty/Method")


def extract_prerequisites(path: ExplorationPath, store: PaperStore,
                          gateway: Gateway) -> LearningPath:
    """Per-paper concept extraction, then one complexity-ordering prompt.

    Duplicates (by normalized name) keep their first occurrence along the
    path; items the ordering reply omits follow in path order.
    """
    if not path.hops:
        raise InvalidConfigError("prerequisite extraction needs a path with at least one hop")

    raw_items: list[tuple[str, str, str]] = []  # (name, kind, source paper)
    seen_names: set[str] = set()
    for paper_id in path.entities():
        paper = store.get_paper(paper_id)
        request = CompletionRequest(
            template_name="prereq_extract",
            values={"title": paper.title, "abstract": paper.abstract},
        )
        parsed: list[tuple[str, str]] | None = None
        for _attempt in range(PARSE_RETRIES):
            response = gateway.complete(request)
            parsed = _parse_items(response.text)
            if parsed:
                break
        if not parsed:
            raise EmptyOutputError(f"no prerequisite items parsed for paper {paper_id!r}")
        for name, kind in parsed:
            norm = _normalize_name(name)
            if norm in seen_names:
                continue
            seen_names.add(norm)
            raw_items.append((name, kind, paper_id))

    if not raw_items:
        raise EmptyOutputError("no prerequisite items extracted along the path")

    keys = [f"P{i + 1}" for i in range(len(raw_items))]
    items_block = "\n".join(
        f"{k}: {name} ({kind}, from: {store.get_paper(pid).title})"
        for k, (name, kind, pid) in zip(keys, raw_items)
    )
    order = list(range(len(raw_items)))
    request = CompletionRequest(template_name="prereq_order",
                                values={"items_block": items_block})
    from .gateway import parse_choice
    from .errors import ParseFailureError

    for _attempt in range(PARSE_RETRIES):
        response = gateway.complete(request)
        try:
            chosen = parse_choice(response.text, keys)
        except ParseFailureError:
            continue
        picked = [keys.index(k) for k in chosen]
        rest = [i for i in range(len(raw_items)) if i not in picked]
        order = picked + rest  # omitted items trail in path order
        break

    items = tuple(
        LearningItem(name=raw_items[i][0], kind=raw_items[i][1],
                     source_paper=raw_items[i][2], complexity_rank=rank)
        for rank, i in enumerate(order, start=1)
    )
    lp = LearningPath(source_path=path.fingerprint(), items=items)
    lp.validate()
    return lp


def synthesize_path(path: ExplorationPath, store: PaperStore, gateway: Gateway,
                    query: str = "") -> SynthesisBundle:
    trend = summarize_trend(path, store, gateway, query)
    idea = generate_hint_idea(path, trend, store, gateway)
    curriculum = extract_prerequisites(path, store, gateway)
    return SynthesisBundle(trend=trend, idea=idea, curriculum=curriculum)


def _parse_bullets(text: str) -> list[str]:
    out = []
    for line in (text or "").splitlines():
        m = _BULLET.match(line)
        if m:
            out.append(m.group(1).strip())
    return out


def _parse_items(text: str) -> list[tuple[str, str]]:
    """Lines of the form '- name | kind'; unknown kinds default to concept."""
    out = []
    for line in (text or "").splitlines():
        m = _BULLET.match(line)
        if not m:
            continue
        body = m.group(1)
        name, _, kind = body.partition("|")
        name = name.strip()
        kind = kind.strip().lower() or "concept"
        if not name:
            continue
        if kind not in ITEM_KINDS:
            kind = "concept"
        out.append((name, kind))
    return out


def _normalize_name(name: str) -> str:
    return " ".join(name.casefold().split())


# --- persistence and reports ---------------------------------------------------

def bundle_to_records(bundle: SynthesisBundle) -> list[dict]:
    fp = bundle.trend.path_fingerprint
    return [
        {"kind": "trend", "path_fingerprint": fp, "narrative": bundle.trend.narrative,
         "predicted_directions": list(bundle.trend.predicted_directions)},
        {"kind": "hint_idea", "path_fingerprint": fp, "motivation": bundle.idea.motivation,
         "novelty": bundle.idea.novelty, "method": bundle.idea.method},
        {"kind": "learning_path", "path_fingerprint": fp,
         "items": [{"name": it.name, "item_kind": it.kind, "source_paper": it.source_paper,
                    "complexity_rank": it.complexity_rank} for it in bundle.curriculum.items]},
    ]


def bundles_from_records(recs) -> dict[str, SynthesisBundle]:
    trends: dict[str, Trend] = {}
    ideas: dict[str, HintIdea] = {}
    curricula: dict[str, LearningPath] = {}
    for rec in recs:
        fp = rec.get("path_fingerprint")
        if rec.get("kind") == "trend":
            trends[fp] = Trend(fp, rec["narrative"], tuple(rec.get("predicted_directions", ())))
        elif rec.get("kind") == "hint_idea":
            ideas[fp] = HintIdea(rec["motivation"], rec["novelty"], rec["method"], fp)
        elif rec.get("kind") == "learning_path":
            items = tuple(LearningItem(it["name"], it["item_kind"], it["source_paper"],
                                       it["complexity_rank"]) for it in rec["items"])
            curricula[fp] = LearningPath(fp, items)
    return {
        fp: SynthesisBundle(trends[fp], ideas[fp], curricula[fp])
        for fp in trends if fp in ideas and fp in curricula
    }


def save_bundles(path, bundles: list[SynthesisBundle]) -> None:
    recs = []
    for b in bundles:
        recs.extend(bundle_to_records(b))
    write_records(path, recs)


def load_bundles(path) -> dict[str, SynthesisBundle]:
    return bundles_from_records(rec for _, rec in read_records(path))


def render_report(bundle: SynthesisBundle, path: ExplorationPath, store: PaperStore) -> str:
    """One-page frontier summary for a single trajectory."""
    lines = [f"# Frontier map for trajectory {bundle.trend.path_fingerprint}", ""]
    lines.append("## Trajectory")
    for hop in path.hops:
        rel = f"({hop.position.section_label}, {SEMANTIC_DISPLAY[hop.semantics.label]})"
        lines.append(f"- {store.get_paper(hop.from_entity).title} "
                     f"-{rel} [{hop.direction}]-> {store.get_paper(hop.to_entity).title}")
    lines += ["", "## Trend", bundle.trend.narrative, "", "## Predicted directions"]
    lines += [f"- {d}" for d in bundle.trend.predicted_directions]
    lines += ["", "## Hint idea",
              f"- Motivation: {bundle.idea.motivation}",
              f"- Novelty: {bundle.idea.novelty}",
              f"- Method: {bundle.idea.method}",
              "", "## Learning path (simplest first)"]
    for it in bundle.curriculum.items:
        title = store.get_paper(it.source_paper).title
        lines.append(f"{it.complexity_rank}. {it.name} [{it.kind}] (from: {title})")
    return "\n".join(lines) + "\n"


def merge_learning_paths(paths: list[LearningPath]) -> list[LearningItem]:
    """Cross-path merge: dedup by normalized name, order by mean rank then name."""
    by_name: dict[str, list[LearningItem]] = {}
    for lp in paths:
        for item in lp.items:
            by_name.setdefault(_normalize_name(item.name), []).append(item)
    merged = []
    for norm, items in by_name.items():
        mean_rank = sum(it.complexity_rank for it in items) / len(items)
        merged.append((mean_rank, norm, items[0]))
    merged.sort(key=lambda t: (t[0], t[1]))
    return [
        LearningItem(name=it.name, kind=it.kind, source_paper=it.source_paper,
                     complexity_rank=i)
        for i, (_mr, _n, it) in enumerate(merged, start=1)
    ]
