"""Upstream scholarly-API clients: topic search, reference and citer lists.

Three backends share one protocol: a deterministic in-memory fixture
backend, an HTTP client for a Semantic-Scholar-style API, and an HTTP
client for an arXiv-style Atom feed.  Live backends write every response
to an on-disk cache; recorded mode replays exclusively from that cache and
fails loudly on a miss.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .errors import UpstreamUnavailableError, QuotaExceededError
from .records import dumps_canonical, read_records, write_records
from .store import PaperNode

log = logging.getLogger(__name__)

ENV_API_KEY = "GOAI_S2_API_KEY"
ENV_CACHE_DIR = "GOAI_CACHE_DIR"
ENV_RATE_LIMIT = "GOAI_RATE_LIMIT_RPS"


class ScholarlyBackend(Protocol):
    def search(self, topic: str, limit: int) -> list[PaperNode]: ...

    def references(self, paper_id: str) -> list[PaperNode]: ...

    def citations(self, paper_id: str) -> list[PaperNode]: ...


class TokenBucket:
    """Global requests-per-second limiter shared by backend workers."""

    def __init__(self, rate_per_sec: float, burst: int = 1):
        self.rate = max(rate_per_sec, 1e-6)
        self.capacity = max(burst, 1)
        self._tokens = float(self.capacity)
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


@dataclass
class FixtureNetwork:
    """Citation network for offline runs: papers plus reference/citer id lists."""

    papers: dict[str, PaperNode] = field(default_factory=dict)
    refs: dict[str, list[str]] = field(default_factory=dict)
    citers: dict[str, list[str]] = field(default_factory=dict)
    topic_hits: dict[str, list[str]] = field(default_factory=dict)

    def add(self, paper: PaperNode, refs: list[str] | None = None,
            citers: list[str] | None = None) -> None:
        self.papers[paper.id] = paper
        if refs is not None:
            self.refs[paper.id] = list(refs)
        if citers is not None:
            self.citers[paper.id] = list(citers)

    def link(self, citing: str, cited: str) -> None:
        self.refs.setdefault(citing, []).append(cited)
        self.citers.setdefault(cited, []).append(citing)

    def to_records(self) -> list[dict]:
        recs = []
        for pid in sorted(self.papers):
            p = self.papers[pid]
            recs.append({
                "kind": "network_paper",
                "id": p.id, "title": p.title, "abstract": p.abstract,
                "authors": list(p.authors), "year": p.year, "venue": p.venue,
                "source": p.source, "url": p.url,
                "refs": self.refs.get(pid, []),
                "citers": self.citers.get(pid, []),
            })
        for topic in sorted(self.topic_hits):
            recs.append({"kind": "topic", "topic": topic, "hits": self.topic_hits[topic]})
        return recs

    @classmethod
    def from_records(cls, recs) -> "FixtureNetwork":
        net = cls()
        for _, rec in recs:
            if rec.get("kind") == "network_paper":
                paper = PaperNode(
                    id=rec["id"], title=rec.get("title", ""), abstract=rec.get("abstract", ""),
                    authors=tuple(rec.get("authors") or ()), year=rec.get("year"),
                    venue=rec.get("venue", ""), source=rec.get("source", "fixture"),
                    url=rec.get("url", ""),
                )
                net.add(paper, rec.get("refs", []), rec.get("citers", []))
            elif rec.get("kind") == "topic":
                net.topic_hits[rec["topic"]] = list(rec["hits"])
        return net

    @classmethod
    def load(cls, path: str | Path) -> "FixtureNetwork":
        return cls.from_records(read_records(path))

    def save(self, path: str | Path) -> None:
        write_records(path, self.to_records())


class FixtureBackend:
    """Serves a FixtureNetwork; deterministic and offline."""

    backend_id = "fixture"

    def __init__(self, network: FixtureNetwork):
        self.network = network

    def search(self, topic: str, limit: int) -> list[PaperNode]:
        hits = self.network.topic_hits.get(topic, [])
        return [self.network.papers[pid] for pid in hits[:limit]]

    def references(self, paper_id: str) -> list[PaperNode]:
        return [self.network.papers[p] for p in self.network.refs.get(paper_id, [])
                if p in self.network.papers]

    def citations(self, paper_id: str) -> list[PaperNode]:
        return [self.network.papers[p] for p in self.network.citers.get(paper_id, [])
                if p in self.network.papers]


class ResponseCache:
    """Append-only JSONL cache of upstream responses keyed by request digest."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, object] = {}
        if self.path.exists():
            for _, rec in read_records(self.path):
                if rec.get("kind") == "response":
                    self._entries[rec["key"]] = rec["payload"]

    @staticmethod
    def request_key(kind: str, **params) -> str:
        raw = dumps_canonical({"kind": kind, "params": params})
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:24]

    def get(self, key: str):
        return self._entries.get(key)

    def put(self, key: str, payload) -> None:
        if key in self._entries:
            return
        self._entries[key] = payload
        line = dumps_canonical({"kind": "response", "key": key, "payload": payload})
        new_file = not self.path.exists()
        with self.path.open("a", encoding="utf-8") as fh:
            if new_file:
                fh.write(dumps_canonical({"kind": "header", "schema_version": 1}) + "\n")
            fh.write(line + "\n")


class CachedHttpBackend:
    """Semantic-Scholar-style REST client with cache and rate limiting.

    In recorded mode no network call is ever made; a cache miss raises.
    """

    backend_id = "semantic_scholar"
    FIELDS = "title,abstract,authors,year,venue,externalIds,url"

    def __init__(self, cache: ResponseCache, base_url: str = "https://api.semanticscholar.org/graph/v1",
                 api_key: str | None = None, rate_limit_rps: float | None = None,
                 recorded_only: bool = False, page_budget: int = 3, page_size: int = 100):
        self.cache = cache
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        rps = rate_limit_rps
        if rps is None:
            rps = float(os.environ.get(ENV_RATE_LIMIT, "1.0"))
        self.bucket = TokenBucket(rps)
        self.recorded_only = recorded_only
        self.page_budget = page_budget
        self.page_size = page_size

    # request -> parsed-json payload, via cache
    def _fetch(self, kind: str, path: str, params: dict):
        key = ResponseCache.request_key(kind, path=path, **params)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.recorded_only:
            raise UpstreamUnavailableError(f"recorded mode cache miss for {kind} {params}")
        payload = self._http_get(path, params)
        self.cache.put(key, payload)
        return payload

    def _http_get(self, path: str, params: dict):
        import httpx

        self.bucket.acquire()
        headers = {"x-api-key": self.api_key} if self.api_key else {}
        try:
            resp = httpx.get(f"{self.base_url}{path}", params=params, headers=headers, timeout=30.0)
        except httpx.HTTPError as exc:
            raise UpstreamUnavailableError(str(exc)) from exc
        if resp.status_code == 429:
            raise QuotaExceededError("rate limited by upstream")
        if resp.status_code >= 500:
            raise UpstreamUnavailableError(f"upstream {resp.status_code}")
        if resp.status_code >= 400:
            raise UpstreamUnavailableError(f"request failed: {resp.status_code} {resp.text[:200]}")
        return resp.json()

    def _to_paper(self, item: dict) -> PaperNode | None:
        pid = item.get("paperId")
        if not pid or not item.get("title"):
            return None
        return PaperNode(
            id=pid,
            title=item["title"],
            abstract=item.get("abstract") or "",
            authors=tuple(a.get("name", "") for a in item.get("authors") or ()),
            year=item.get("year") if item.get("year") else None,
            venue=item.get("venue") or "",
            source="semantic_scholar",
            url=item.get("url") or "",
            fetched_at=0.0,
        )

    def search(self, topic: str, limit: int) -> list[PaperNode]:
        payload = self._fetch("search", "/paper/search",
                              {"query": topic, "limit": limit, "fields": self.FIELDS})
        papers = [self._to_paper(it) for it in payload.get("data", [])]
        return [p for p in papers if p is not None][:limit]

    def _linked(self, kind: str, paper_id: str, path_tpl: str, item_key: str) -> list[PaperNode]:
        out: list[PaperNode] = []
        for page in range(self.page_budget):
            payload = self._fetch(kind, path_tpl.format(paper_id),
                                  {"offset": page * self.page_size, "limit": self.page_size,
                                   "fields": self.FIELDS})
            data = payload.get("data", [])
            for it in data:
                paper = self._to_paper(it.get(item_key) or {})
                if paper is not None:
                    out.append(paper)
            if len(data) < self.page_size:
                break
        return out

    def references(self, paper_id: str) -> list[PaperNode]:
        return self._linked("references", paper_id, "/paper/{}/references", "citedPaper")

    def citations(self, paper_id: str) -> list[PaperNode]:
        return self._linked("citations", paper_id, "/paper/{}/citations", "citingPaper")


class ArxivBackend:
    """arXiv-style Atom search client (search only; no citation endpoints)."""

    backend_id = "arxiv"
    _NS = {"atom": "http://www.w3.org/2005/Atom"}

    def __init__(self, cache: ResponseCache, base_url: str = "http://export.arxiv.org/api/query",
                 rate_limit_rps: float = 0.33, recorded_only: bool = False):
        self.cache = cache
        self.base_url = base_url
        self.bucket = TokenBucket(rate_limit_rps)
        self.recorded_only = recorded_only

    def search(self, topic: str, limit: int) -> list[PaperNode]:
        params = {"search_query": f"all:{topic}", "start": 0, "max_results": limit}
        key = ResponseCache.request_key("arxiv_search", **params)
        text = self.cache.get(key)
        if text is None:
            if self.recorded_only:
                raise UpstreamUnavailableError(f"recorded mode cache miss for arxiv {topic!r}")
            import httpx

            self.bucket.acquire()
            try:
                resp = httpx.get(self.base_url, params=params, timeout=30.0)
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise UpstreamUnavailableError(str(exc)) from exc
            text = resp.text
            self.cache.put(key, text)
        return self._parse_feed(text, limit)

    def _parse_feed(self, text: str, limit: int) -> list[PaperNode]:
        root = ET.fromstring(text)
        out = []
        for entry in root.findall("atom:entry", self._NS)[:limit]:
            raw_id = entry.findtext("atom:id", "", self._NS)
            title = " ".join((entry.findtext("atom:title", "", self._NS) or "").split())
            if not raw_id or not title:
                continue
            arxiv_id = raw_id.rsplit("/", 1)[-1]
            published = entry.findtext("atom:published", "", self._NS)
            year = int(published[:4]) if published[:4].isdigit() else None
            out.append(PaperNode(
                id=f"arxiv:{arxiv_id}",
                title=title,
                abstract=" ".join((entry.findtext("atom:summary", "", self._NS) or "").split()),
                authors=tuple(a.findtext("atom:name", "", self._NS)
                              for a in entry.findall("atom:author", self._NS)),
                year=year,
                source="arxiv",
                url=raw_id,
                fetched_at=0.0,
            ))
        return out

    def references(self, paper_id: str) -> list[PaperNode]:
        return []

    def citations(self, paper_id: str) -> list[PaperNode]:
        return []
