"""Canonical storage for paper entities and citation quadruple edges.

Edges follow the convention citing -> cited: outgoing edges of a paper are
its references (backward extension), incoming edges are its citers (forward
extension).  Uniqueness is per (citing, cited, section label, semantics
label); cycles are allowed at the store level.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    DuplicatePaperError,
    InvalidNodeError,
    InvalidSemanticsError,
    MalformedSnapshotError,
    MissingEndpointError,
    SelfCitationError,
    UnknownEntityError,
)
from .records import decode_records, encode_records
from .sections import SECTION_LABELS

SEMANTIC_LABELS = ("BE", "SS", "CA", "QR", "MI")

#: printable forms used in prompts and reports
SEMANTIC_DISPLAY = {"BE": "B&E", "SS": "S&S", "CA": "C&A", "QR": "Q&R", "MI": "M/I"}

PAPER_SOURCES = ("semantic_scholar", "arxiv", "fixture")


@dataclass(frozen=True)
class PaperNode:
    id: str
    title: str
    abstract: str = ""
    authors: tuple[str, ...] = ()
    year: int | None = None
    venue: str = ""
    source: str = "fixture"
    url: str = ""
    embedding: tuple[float, ...] | None = None
    fetched_at: float = 0.0

    def validate(self) -> None:
        if not self.id:
            raise InvalidNodeError("paper id must be non-empty")
        if self.source not in PAPER_SOURCES:
            raise InvalidNodeError(f"unknown source {self.source!r}")
        if self.year is not None and self.year <= 0:
            raise InvalidNodeError("year must be positive when known")
        if self.embedding is not None:
            norm = math.sqrt(sum(x * x for x in self.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise InvalidNodeError(f"embedding norm {norm} not unit")


@dataclass(frozen=True)
class CitationPosition:
    section_label: str
    raw_heading: str = ""

    def validate(self) -> None:
        if self.section_label not in SECTION_LABELS:
            raise InvalidSemanticsError(f"unknown section label {self.section_label!r}")


@dataclass(frozen=True)
class CitationSemantics:
    label: str
    evidence: str = ""
    confidence: float = 1.0

    def validate(self) -> None:
        if self.label not in SEMANTIC_LABELS:
            raise InvalidSemanticsError(f"unknown semantics label {self.label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidSemanticsError(f"confidence {self.confidence} outside [0,1]")
        if self.label != "MI" and not self.evidence:
            raise InvalidSemanticsError(f"label {self.label} requires evidence text")


@dataclass(frozen=True)
class GoAIQuad:
    citing: str
    position: CitationPosition
    semantics: CitationSemantics
    cited: str

    def key(self) -> tuple[str, str, str, str]:
        return (self.citing, self.cited, self.position.section_label, self.semantics.label)

    def edge_id(self) -> str:
        raw = "|".join(self.key())
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class NeighborEdge:
    """One store edge seen from a query entity."""

    position: CitationPosition
    semantics: CitationSemantics
    neighbor: str
    direction: str  # "outgoing" | "incoming"
    quad: GoAIQuad = field(compare=False)

    @property
    def relation(self) -> tuple[CitationPosition, CitationSemantics]:
        return (self.position, self.semantics)

    def sort_key(self) -> tuple:
        return (self.neighbor, self.position.section_label, self.semantics.label, self.direction)


class PaperStore:
    """In-memory graph with serialized mutation and concurrent reads."""

    def __init__(self):
        self._papers: dict[str, PaperNode] = {}
        self._quads: dict[str, GoAIQuad] = {}
        self._out: dict[str, list[str]] = {}
        self._in: dict[str, list[str]] = {}
        self._write_lock = threading.Lock()

    # --- papers ---------------------------------------------------------

    def add_paper(self, paper: PaperNode) -> str:
        paper.validate()
        with self._write_lock:
            existing = self._papers.get(paper.id)
            if existing is not None:
                if existing == paper:
                    return paper.id
                raise DuplicatePaperError(
                    f"paper {paper.id!r} already stored with different content"
                )
            self._papers[paper.id] = paper
            return paper.id

    def update_paper(self, paper: PaperNode) -> str:
        """Explicit overwrite path; add_paper refuses changed content."""
        paper.validate()
        with self._write_lock:
            if paper.id not in self._papers:
                raise UnknownEntityError(f"unknown paper {paper.id!r}")
            self._papers[paper.id] = paper
            return paper.id

    def get_paper(self, paper_id: str) -> PaperNode:
        try:
            return self._papers[paper_id]
        except KeyError:
            raise UnknownEntityError(f"unknown paper {paper_id!r}") from None

    def has_paper(self, paper_id: str) -> bool:
        return paper_id in self._papers

    def papers(self) -> list[PaperNode]:
        return [self._papers[k] for k in sorted(self._papers)]

    @property
    def paper_count(self) -> int:
        return len(self._papers)

    # --- quads ----------------------------------------------------------

    def add_quad(self, quad: GoAIQuad) -> str:
        quad.position.validate()
        quad.semantics.validate()
        if quad.citing == quad.cited:
            raise SelfCitationError(f"paper {quad.citing!r} cannot cite itself")
        with self._write_lock:
            for endpoint in (quad.citing, quad.cited):
                if endpoint not in self._papers:
                    raise MissingEndpointError(f"endpoint {endpoint!r} not in store")
            edge_id = quad.edge_id()
            if edge_id in self._quads:
                return edge_id
            self._quads[edge_id] = quad
            self._out.setdefault(quad.citing, []).append(edge_id)
            self._in.setdefault(quad.cited, []).append(edge_id)
            return edge_id

    def remove_quad(self, edge_id: str) -> None:
        with self._write_lock:
            quad = self._quads.pop(edge_id, None)
            if quad is None:
                raise UnknownEntityError(f"unknown edge {edge_id!r}")
            self._out[quad.citing].remove(edge_id)
            self._in[quad.cited].remove(edge_id)

    def get_quad(self, edge_id: str) -> GoAIQuad:
        try:
            return self._quads[edge_id]
        except KeyError:
            raise UnknownEntityError(f"unknown edge {edge_id!r}") from None

    def quads(self) -> list[GoAIQuad]:
        return sorted(self._quads.values(), key=lambda q: q.key())

    @property
    def quad_count(self) -> int:
        return len(self._quads)

    # --- queries --------------------------------------------------------

    def neighbors(self, entity: str, direction: str = "both") -> list[NeighborEdge]:
        if direction not in ("outgoing", "incoming", "both"):
            raise ValueError(f"bad direction {direction!r}")
        if entity not in self._papers:
            raise UnknownEntityError(f"unknown paper {entity!r}")
        hits: list[NeighborEdge] = []
        if direction in ("outgoing", "both"):
            for edge_id in self._out.get(entity, ()):
                q = self._quads[edge_id]
                hits.append(NeighborEdge(q.position, q.semantics, q.cited, "outgoing", q))
        if direction in ("incoming", "both"):
            for edge_id in self._in.get(entity, ()):
                q = self._quads[edge_id]
                hits.append(NeighborEdge(q.position, q.semantics, q.citing, "incoming", q))
        hits.sort(key=NeighborEdge.sort_key)
        return hits

    # --- snapshot -------------------------------------------------------

    def snapshot(self) -> str:
        recs: list[dict] = []
        for paper in self.papers():
            recs.append(_paper_record(paper))
        for quad in self.quads():
            recs.append(_quad_record(quad))
        return encode_records(recs)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.snapshot(), encoding="utf-8")

    @classmethod
    def from_snapshot(cls, text: str) -> "PaperStore":
        store = cls()
        pending_quads: list[tuple[int, GoAIQuad]] = []
        for lineno, rec in decode_records(text):
            kind = rec.get("kind")
            if kind == "paper":
                store.add_paper(_paper_from_record(rec, lineno))
            elif kind == "quad":
                pending_quads.append((lineno, _quad_from_record(rec, lineno)))
            else:
                raise MalformedSnapshotError(f"unknown record kind {kind!r}", line=lineno)
        for lineno, quad in pending_quads:
            try:
                store.add_quad(quad)
            except (MissingEndpointError, SelfCitationError, InvalidSemanticsError) as exc:
                raise MalformedSnapshotError(str(exc), line=lineno) from exc
        return store

    @classmethod
    def load(cls, path: str | Path) -> "PaperStore":
        return cls.from_snapshot(Path(path).read_text(encoding="utf-8"))


def _paper_record(paper: PaperNode) -> dict:
    return {
        "kind": "paper",
        "id": paper.id,
        "title": paper.title,
        "abstract": paper.abstract,
        "authors": list(paper.authors),
        "year": paper.year,
        "venue": paper.venue,
        "source": paper.source,
        "url": paper.url,
        "embedding": list(paper.embedding) if paper.embedding is not None else None,
        "fetched_at": paper.fetched_at,
    }


def _paper_from_record(rec: dict, lineno: int) -> PaperNode:
    try:
        embedding = rec.get("embedding")
        return PaperNode(
            id=rec["id"],
            title=rec.get("title", ""),
            abstract=rec.get("abstract", ""),
            authors=tuple(rec.get("authors") or ()),
            year=rec.get("year"),
            venue=rec.get("venue", ""),
            source=rec.get("source", "fixture"),
            url=rec.get("url", ""),
            embedding=tuple(embedding) if embedding is not None else None,
            fetched_at=rec.get("fetched_at", 0.0),
        )
    except (KeyError, TypeError) as exc:
        raise MalformedSnapshotError(f"bad paper record: {exc}", line=lineno) from exc


def _quad_record(quad: GoAIQuad) -> dict:
    return {
        "kind": "quad",
        "citing": quad.citing,
        "position": {
            "section_label": quad.position.section_label,
            "raw_heading": quad.position.raw_heading,
        },
        "semantics": {
            "label": quad.semantics.label,
            "evidence": quad.semantics.evidence,
            "confidence": quad.semantics.confidence,
        },
        "cited": quad.cited,
    }


def _quad_from_record(rec: dict, lineno: int) -> GoAIQuad:
    try:
        pos = rec["position"]
        sem = rec["semantics"]
        quad = GoAIQuad(
            citing=rec["citing"],
            position=CitationPosition(pos["section_label"], pos.get("raw_heading", "")),
            semantics=CitationSemantics(
                sem["label"], sem.get("evidence", ""), sem.get("confidence", 1.0)
            ),
            cited=rec["cited"],
        )
    except (KeyError, TypeError) as exc:
        raise MalformedSnapshotError(f"bad quad record: {exc}", line=lineno) from exc
    try:
        quad.position.validate()
        quad.semantics.validate()
    except InvalidSemanticsError as exc:
        raise MalformedSnapshotError(str(exc), line=lineno) from exc
    return quad


def with_embedding(paper: PaperNode, embedding: Iterable[float] | None) -> PaperNode:
    return replace(paper, embedding=tuple(embedding) if embedding is not None else None)


def iter_placeholder_edges(store: PaperStore) -> Iterator[tuple[str, GoAIQuad]]:
    """Edges still carrying the ingest placeholder relation (Other / MI / conf 0)."""
    for quad in store.quads():
        if (
            quad.semantics.label == "MI"
            and quad.semantics.confidence == 0.0
            and quad.position.section_label == "Other"
            and not quad.position.raw_heading
        ):
            yield quad.edge_id(), quad
