"""Citation mention extraction from pre-parsed sections and semantic labeling.

Input is structured section text (an external PDF parser's output, adapted
to the record contract in docs/section-input.md), never raw PDFs.  Each
resolvable marker becomes a mention; each mention is labeled with one of
the five relation classes by the gateway, falling back to M/I after the
parse-retry budget is exhausted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidNodeError, ParseFailureError
from .gateway import PARSE_RETRIES, CompletionRequest, Gateway
from .records import read_records, write_records
from .sections import normalize_heading
from .store import CitationPosition, CitationSemantics, GoAIQuad

log = logging.getLogger(__name__)

#: answer vocabulary accepted from the classifier, mapped to canonical labels
LABEL_ALIASES = {
    "B&E": "BE", "BE": "BE",
    "S&S": "SS", "SS": "SS",
    "C&A": "CA", "CA": "CA",
    "Q&R": "QR", "QR": "QR",
    "M/I": "MI", "MI": "MI",
}


@dataclass(frozen=True)
class CitationMarker:
    marker: str
    paragraph_index: int
    char_span: tuple[int, int]
    resolved_paper_id: str | None = None


@dataclass(frozen=True)
class SectionText:
    paper_id: str
    heading: str
    paragraphs: tuple[str, ...]
    citation_markers: tuple[CitationMarker, ...] = ()

    def validate(self) -> None:
        for m in self.citation_markers:
            if not 0 <= m.paragraph_index < len(self.paragraphs):
                raise InvalidNodeError(
                    f"marker {m.marker!r} paragraph_index {m.paragraph_index} out of range"
                )
            para = self.paragraphs[m.paragraph_index]
            start, end = m.char_span
            if not (0 <= start <= end <= len(para)):
                raise InvalidNodeError(f"marker {m.marker!r} span {m.char_span} outside paragraph")


@dataclass(frozen=True)
class CitationMention:
    citing_paper: str
    cited_paper: str
    position: CitationPosition
    context_window: str
    marker: str = ""
    paragraph_index: int = 0
    char_span: tuple[int, int] = (0, 0)


@dataclass
class MentionExtraction:
    mentions: list[CitationMention] = field(default_factory=list)
    unresolved: list[CitationMarker] = field(default_factory=list)


def extract_mentions(section: SectionText, resolver: dict[str, str]) -> MentionExtraction:
    """One mention per resolvable marker; unresolvable markers are reported, not dropped."""
    section.validate()
    result = MentionExtraction()
    position = CitationPosition(
        section_label=normalize_heading(section.heading),
        raw_heading=section.heading,
    )
    markers = sorted(section.citation_markers, key=lambda m: (m.paragraph_index, m.char_span))
    for marker in markers:
        cited = marker.resolved_paper_id or resolver.get(marker.marker)
        if cited is None:
            result.unresolved.append(marker)
            continue
        result.mentions.append(CitationMention(
            citing_paper=section.paper_id,
            cited_paper=cited,
            position=position,
            context_window=section.paragraphs[marker.paragraph_index],
            marker=marker.marker,
            paragraph_index=marker.paragraph_index,
            char_span=marker.char_span,
        ))
    return result


def classify_mention(mention: CitationMention, gateway: Gateway,
                     titles: dict[str, str] | None = None) -> CitationSemantics:
    """Label one mention with a relation class.

    Clean parses carry confidence 1.0; after the retry budget the safe
    fallback is M/I with confidence 0.
    """
    titles = titles or {}
    request = CompletionRequest(
        template_name="citation_classify",
        values={
            "citing_title": titles.get(mention.citing_paper, mention.citing_paper),
            "cited_title": titles.get(mention.cited_paper, mention.cited_paper),
            "section": mention.position.section_label,
            "context": mention.context_window,
        },
    )
    for _attempt in range(PARSE_RETRIES):
        response = gateway.complete(request)
        label = parse_label(response.text)
        if label is not None:
            return CitationSemantics(label=label, evidence=mention.context_window,
                                     confidence=1.0)
    log.debug("classifier output unparseable after %d attempts; falling back to MI",
              PARSE_RETRIES)
    return CitationSemantics(label="MI", evidence=mention.context_window, confidence=0.0)


def parse_label(text: str) -> str | None:
    """First relation-class token in the reply, or None."""
    best: tuple[int, str] | None = None
    upper = (text or "").upper()
    for alias, label in LABEL_ALIASES.items():
        pos = _find_alias(upper, alias)
        if pos >= 0 and (best is None or pos < best[0]):
            best = (pos, label)
    return best[1] if best else None


def _find_alias(upper_text: str, alias: str) -> int:
    start = 0
    while True:
        pos = upper_text.find(alias, start)
        if pos < 0:
            return -1
        before = upper_text[pos - 1] if pos > 0 else " "
        after_idx = pos + len(alias)
        after = upper_text[after_idx] if after_idx < len(upper_text) else " "
        if not before.isalnum() and not after.isalnum():
            return pos
        start = pos + 1


def classify_section(section: SectionText, resolver: dict[str, str], gateway: Gateway,
                     titles: dict[str, str] | None = None) -> list[GoAIQuad]:
    """Extract and classify every resolvable mention, deduplicated per quad key."""
    extraction = extract_mentions(section, resolver)
    quads: list[GoAIQuad] = []
    seen: set[tuple[str, str, str, str]] = set()
    for mention in extraction.mentions:
        if mention.citing_paper == mention.cited_paper:
            continue
        semantics = classify_mention(mention, gateway, titles)
        quad = GoAIQuad(citing=mention.citing_paper, position=mention.position,
                        semantics=semantics, cited=mention.cited_paper)
        if quad.key() in seen:
            continue
        seen.add(quad.key())
        quads.append(quad)
    return quads


# --- section record IO --------------------------------------------------------

def section_to_record(section: SectionText) -> dict:
    return {
        "kind": "section",
        "paper_id": section.paper_id,
        "heading": section.heading,
        "paragraphs": list(section.paragraphs),
        "citation_markers": [
            {"marker": m.marker, "resolved_paper_id": m.resolved_paper_id,
             "paragraph_index": m.paragraph_index, "char_span": list(m.char_span)}
            for m in section.citation_markers
        ],
    }


def section_from_record(rec: dict) -> SectionText:
    markers = tuple(
        CitationMarker(
            marker=m["marker"],
            resolved_paper_id=m.get("resolved_paper_id"),
            paragraph_index=m["paragraph_index"],
            char_span=tuple(m["char_span"]),
        )
        for m in rec.get("citation_markers", ())
    )
    return SectionText(
        paper_id=rec["paper_id"],
        heading=rec.get("heading", ""),
        paragraphs=tuple(rec.get("paragraphs", ())),
        citation_markers=markers,
    )


def load_sections(path: str | Path) -> list[SectionText]:
    return [section_from_record(rec) for _, rec in read_records(path)
            if rec.get("kind") == "section"]


def save_sections(path: str | Path, sections: list[SectionText]) -> None:
    write_records(path, [section_to_record(s) for s in sections])
