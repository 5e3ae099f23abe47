"""Staged idea review, multi-agent voting, dataset preparation, correlation.

Reviews run in three tagged stages (Summary, Analysis, Score); a verdict is
the thresholded majority over agents.  Dataset preparation maps review-dump
fields onto golden answers for the three stages, normalizing heterogeneous
venue score scales to 1-10 through a per-venue affine table.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import (
    EmptyResultsError,
    LengthMismatchError,
    MalformedReviewError,
    MissingStageError,
    NonIntegerScoreError,
    OutOfOrderStagesError,
    ZeroVarianceError,
)
from .gateway import PARSE_RETRIES, CompletionRequest, Gateway
from .records import read_records, write_records
from .store import PaperNode
from .synthesis import LearningItem, LearningPath

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 5
DEFAULT_AGENTS = 3

STAGES = ("Summary", "Analysis", "Score")

#: per-venue source scale of the novelty/significance field (min, max)
DEFAULT_VENUE_SCALES: dict[str, tuple[int, int]] = {
    "default": (1, 10),
    "iclr": (1, 4),
    "neurips": (1, 4),
}


@dataclass(frozen=True)
class ReviewResult:
    summary: str
    strengths: str
    weaknesses: str
    score: int
    raw: str
    agent_id: str

    @property
    def analysis(self) -> tuple[str, str]:
        return (self.strengths, self.weaknesses)


@dataclass(frozen=True)
class Verdict:
    per_agent: tuple[ReviewResult, ...]
    promising_votes: int
    decision: str  # "promising" | "unpromising"
    threshold: int


@dataclass(frozen=True)
class SftRecord:
    paper_id: str
    abstract: str
    golden_summary: str
    golden_analysis: str
    golden_score: int
    venue_year: str


# --- staged output parsing -----------------------------------------------------

_TAG = {stage: re.compile(rf"<{stage}>(.*?)</{stage}>", re.DOTALL | re.IGNORECASE)
        for stage in STAGES}


def parse_staged_output(raw: str) -> tuple[str, str, int]:
    """Extract (summary, analysis, score) from the three tag-delimited stages.

    Stages must appear in order; prose outside the tags is ignored.
    """
    found: dict[str, tuple[str, int]] = {}
    for stage in STAGES:
        m = _TAG[stage].search(raw or "")
        if m is None:
            raise MissingStageError(stage)
        found[stage] = (m.group(1).strip(), m.start())
    offsets = [found[stage][1] for stage in STAGES]
    if offsets != sorted(offsets):
        raise OutOfOrderStagesError(f"stages out of order at offsets {offsets}")
    score_text = found["Score"][0]
    m = re.fullmatch(r"\s*(-?\d+)\s*", score_text)
    if m is None:
        raise NonIntegerScoreError(f"score block {score_text!r} is not an integer")
    score = int(m.group(1))
    if not 1 <= score <= 10:
        raise NonIntegerScoreError(f"score {score} outside 1..10")
    return found["Summary"][0], found["Analysis"][0], score


def split_analysis(analysis: str) -> tuple[str, str]:
    """Split an analysis block on its 'Weaknesses:' marker."""
    m = re.search(r"weaknesses\s*:", analysis, re.IGNORECASE)
    if m is None:
        return analysis.strip(), ""
    strengths = re.sub(r"^\s*strengths\s*:", "", analysis[: m.start()], flags=re.IGNORECASE)
    return strengths.strip(), analysis[m.end():].strip()


def review_idea(idea: str, abstract: str, gateway: Gateway, agent_id: str = "a1") -> ReviewResult:
    """One agent's staged review of an idea; retries malformed outputs R times."""
    if not idea:
        raise MalformedReviewError("idea must be non-empty")
    request = CompletionRequest(
        template_name="review_stage",
        values={"idea": idea, "abstract": abstract, "agent_id": agent_id},
    )
    last: MalformedReviewError | None = None
    for _attempt in range(PARSE_RETRIES):
        response = gateway.complete(request)
        try:
            summary, analysis, score = parse_staged_output(response.text)
        except MalformedReviewError as exc:
            last = exc
            continue
        strengths, weaknesses = split_analysis(analysis)
        return ReviewResult(summary=summary, strengths=strengths, weaknesses=weaknesses,
                            score=score, raw=response.text, agent_id=agent_id)
    raise last or MalformedReviewError("no usable staged output")


def majority_vote(results: list[ReviewResult], threshold: int = DEFAULT_THRESHOLD) -> Verdict:
    """Promising iff a strict majority of agents score at or above the threshold."""
    if not results:
        raise EmptyResultsError("majority_vote needs at least one result")
    if len(results) % 2 == 0:
        log.warning("even agent count %d can produce no-majority splits", len(results))
    votes = sum(1 for r in results if r.score >= threshold)
    decision = "promising" if votes > len(results) / 2 else "unpromising"
    return Verdict(per_agent=tuple(results), promising_votes=votes,
                   decision=decision, threshold=threshold)


def multi_agent_review(idea: str, abstract: str, gateway: Gateway,
                       agents: int = DEFAULT_AGENTS, threshold: int = DEFAULT_THRESHOLD,
                       jobs: int = 1) -> Verdict:
    agent_ids = [f"a{i + 1}" for i in range(agents)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda aid: review_idea(idea, abstract, gateway, aid), agent_ids))
    else:
        results = [review_idea(idea, abstract, gateway, aid) for aid in agent_ids]
    return majority_vote(results, threshold)


# --- learning-path validation ----------------------------------------------------

_EDIT = re.compile(r"^\s*(keep|drop|revise)\s+(\d+)\s*(?::\s*(.*))?$", re.IGNORECASE)


def parse_edits(block: str) -> list[tuple[str, int, str]]:
    edits = []
    for line in (block or "").splitlines():
        m = _EDIT.match(line.strip())
        if m:
            action = m.group(1).lower()
            edits.append((action, int(m.group(2)), (m.group(3) or "").strip()))
    return edits


def validate_learning_path(
    path: LearningPath,
    source_papers: list[PaperNode],
    gateway: Gateway,
    agents: int = DEFAULT_AGENTS,
    threshold: int = DEFAULT_THRESHOLD,
    jobs: int = 1,
) -> tuple[LearningPath, Verdict]:
    """Agents audit items and ordering; only strict-majority identical edits apply."""
    if agents < 1:
        raise EmptyResultsError("need at least one agent")
    items_block = "\n".join(
        f"{it.complexity_rank}. {it.name} [{it.kind}]" for it in path.items
    )
    papers_block = "\n".join(f"- {p.title}: {p.abstract}" for p in source_papers)

    def run_agent(agent_id: str) -> tuple[ReviewResult, list[tuple[str, int, str]]]:
        request = CompletionRequest(
            template_name="path_validate",
            values={"items_block": items_block, "papers_block": papers_block,
                    "agent_id": agent_id},
        )
        last: MalformedReviewError | None = None
        for _attempt in range(PARSE_RETRIES):
            response = gateway.complete(request)
            try:
                summary, analysis, score = parse_staged_output(response.text)
            except MalformedReviewError as exc:
                last = exc
                continue
            strengths, weaknesses = split_analysis(analysis)
            result = ReviewResult(summary=summary, strengths=strengths,
                                  weaknesses=weaknesses, score=score,
                                  raw=response.text, agent_id=agent_id)
            edits_block = re.search(r"<Edits>(.*?)</Edits>", response.text,
                                    re.DOTALL | re.IGNORECASE)
            return result, parse_edits(edits_block.group(1) if edits_block else "")
        raise last or MalformedReviewError("no usable validation output")

    agent_ids = [f"a{i + 1}" for i in range(agents)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_agent, agent_ids))
    else:
        outcomes = [run_agent(aid) for aid in agent_ids]

    results = [r for r, _ in outcomes]
    counts: dict[tuple[str, int, str], int] = {}
    for _r, edits in outcomes:
        for edit in set(edits):
            if edit[0] == "keep":
                continue
            counts[edit] = counts.get(edit, 0) + 1
    majority = {e for e, n in counts.items() if n > agents / 2}

    drops = {idx for action, idx, _ in majority if action == "drop"}
    revisions = {idx: text for action, idx, text in majority if action == "revise" and text}
    new_items = []
    for it in path.items:
        if it.complexity_rank in drops:
            continue
        name = revisions.get(it.complexity_rank, it.name)
        new_items.append(LearningItem(name=name, kind=it.kind,
                                      source_paper=it.source_paper,
                                      complexity_rank=len(new_items) + 1))
    validated = LearningPath(source_path=path.source_path, items=tuple(new_items))
    validated.validate()
    return validated, majority_vote(results, threshold)


# --- dataset preparation ----------------------------------------------------------

_FIELD_ALIASES = {
    "summary": ("summary_of_the_paper",),
    "strengths_weaknesses": ("strengths_and_weaknesses", "strength_and_weaknesses"),
    "score": ("technical_novelty_and_significance",),
}


def _norm_key(key: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", key.lower()).strip("_")


def _lookup(rec: dict, aliases: tuple[str, ...]):
    normed = {_norm_key(k): v for k, v in rec.items()}
    for alias in aliases:
        if normed.get(alias) not in (None, ""):
            return normed[alias]
    return None


def _parse_score(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        m = re.match(r"\s*(\d+)", value)
        if m:
            return int(m.group(1))
    return None


def normalize_score(raw: int, venue: str,
                    scales: dict[str, tuple[int, int]] | None = None) -> int | None:
    """Affine-map a venue-scale score onto 1-10; None when outside its scale."""
    scales = scales or DEFAULT_VENUE_SCALES
    lo, hi = scales.get(venue.lower().split()[0] if venue else "default",
                        scales["default"])
    if not lo <= raw <= hi:
        return None
    if (lo, hi) == (1, 10):
        return raw
    return round(1 + (raw - lo) * 9 / (hi - lo))


def prepare_sft_dataset(
    dump: list[dict],
    scales: dict[str, tuple[int, int]] | None = None,
) -> tuple[list[SftRecord], dict[str, int]]:
    """Map raw review-dump records onto golden three-stage answers.

    golden_summary comes from the paper-summary field, golden_analysis from
    that summary plus the strengths-and-weaknesses field, golden_score from
    the technical-novelty field.  Records missing any field are skipped and
    counted by reason.
    """
    out: list[SftRecord] = []
    skipped: dict[str, int] = {}

    def skip(reason: str) -> None:
        skipped[reason] = skipped.get(reason, 0) + 1

    for rec in dump:
        if not isinstance(rec, dict):
            skip("malformed_record")
            continue
        paper_id = rec.get("paper_id") or rec.get("id")
        abstract = rec.get("abstract")
        summary = _lookup(rec, _FIELD_ALIASES["summary"])
        sw = _lookup(rec, _FIELD_ALIASES["strengths_weaknesses"])
        raw_score = _lookup(rec, _FIELD_ALIASES["score"])
        if not paper_id:
            skip("missing_paper_id")
            continue
        if not abstract:
            skip("missing_abstract")
            continue
        if not summary:
            skip("missing_summary")
            continue
        if not sw:
            skip("missing_strengths_weaknesses")
            continue
        if raw_score is None:
            skip("missing_score")
            continue
        score = _parse_score(raw_score)
        if score is None:
            skip("invalid_score")
            continue
        venue = str(rec.get("venue", ""))
        year = rec.get("year", "")
        normalized = normalize_score(score, venue, scales)
        if normalized is None:
            skip("invalid_score")
            continue
        out.append(SftRecord(
            paper_id=str(paper_id),
            abstract=str(abstract),
            golden_summary=str(summary),
            golden_analysis=f"{summary}\n\n{sw}",
            golden_score=normalized,
            venue_year=f"{venue} {year}".strip(),
        ))
    return out, skipped


def save_sft_dataset(path, records: list[SftRecord], skipped: dict[str, int]) -> None:
    recs: list[dict] = [{
        "kind": "sft",
        "paper_id": r.paper_id,
        "abstract": r.abstract,
        "golden_summary": r.golden_summary,
        "golden_analysis": r.golden_analysis,
        "golden_score": r.golden_score,
        "venue_year": r.venue_year,
    } for r in records]
    recs.append({"kind": "skip_counts", "counts": dict(sorted(skipped.items()))})
    write_records(path, recs)


# --- correlation harness ------------------------------------------------------------

def pearson(xs: list[float], ys: list[float]) -> float:
    """Product-moment correlation coefficient."""
    if len(xs) != len(ys):
        raise LengthMismatchError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise LengthMismatchError(f"need at least 2 points (got {n})")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise ZeroVarianceError("pearson undefined for a constant sequence")
    return sum(a * b for a, b in zip(dx, dy)) / math.sqrt(var_x * var_y)


def correlation_report(pairs_path) -> dict:
    """Read (model_score, human_score) pair records and report the correlation."""
    xs, ys = [], []
    for _, rec in read_records(pairs_path):
        if "model_score" in rec and "human_score" in rec:
            xs.append(float(rec["model_score"]))
            ys.append(float(rec["human_score"]))
    return {
        "n": len(xs),
        "pearson": pearson(xs, ys),
        "model_mean": sum(xs) / len(xs),
        "human_mean": sum(ys) / len(ys),
    }
