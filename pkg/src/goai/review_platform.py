"""Review-platform client (API-v2 style) for building the training dump.

Live traffic goes through the shared response cache; fixture mode serves a
pre-built dump.  Each dump record merges a submission with one of its
reviews, carrying the raw review fields that dataset preparation maps onto
golden answers.
"""

from __future__ import annotations

import logging
from typing import Protocol

from .errors import UpstreamUnavailableError
from .records import read_records, write_records
from .scholarly import ResponseCache, TokenBucket

log = logging.getLogger(__name__)


class ReviewPlatform(Protocol):
    def list_venues(self) -> list[str]: ...

    def list_submissions(self, venue: str) -> list[dict]: ...

    def fetch_reviews(self, submission_id: str) -> list[dict]: ...


class FixtureReviewPlatform:
    def __init__(self, submissions: dict[str, list[dict]], reviews: dict[str, list[dict]]):
        self._submissions = submissions
        self._reviews = reviews

    def list_venues(self) -> list[str]:
        return sorted(self._submissions)

    def list_submissions(self, venue: str) -> list[dict]:
        return list(self._submissions.get(venue, ()))

    def fetch_reviews(self, submission_id: str) -> list[dict]:
        return list(self._reviews.get(submission_id, ()))


class HttpReviewPlatform:
    """Thin client for an API-v2-style notes endpoint with response caching."""

    def __init__(self, cache: ResponseCache, base_url: str = "https://api2.openreview.net",
                 rate_limit_rps: float = 1.0, recorded_only: bool = False):
        self.cache = cache
        self.base_url = base_url.rstrip("/")
        self.bucket = TokenBucket(rate_limit_rps)
        self.recorded_only = recorded_only

    def _get(self, kind: str, path: str, params: dict):
        key = ResponseCache.request_key(kind, path=path, **params)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.recorded_only:
            raise UpstreamUnavailableError(f"recorded mode cache miss for {kind} {params}")
        import httpx

        self.bucket.acquire()
        try:
            resp = httpx.get(f"{self.base_url}{path}", params=params, timeout=30.0)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise UpstreamUnavailableError(str(exc)) from exc
        payload = resp.json()
        self.cache.put(key, payload)
        return payload

    def list_venues(self) -> list[str]:
        payload = self._get("venues", "/groups", {"id": "venues"})
        members = (payload.get("groups") or [{}])[0].get("members", [])
        return list(members)

    def list_submissions(self, venue: str) -> list[dict]:
        payload = self._get("submissions", "/notes", {"content.venueid": venue})
        return [
            {"id": n.get("id"),
             "title": _value(n, "title"),
             "abstract": _value(n, "abstract"),
             "venue": venue}
            for n in payload.get("notes", [])
        ]

    def fetch_reviews(self, submission_id: str) -> list[dict]:
        payload = self._get("reviews", "/notes", {"forum": submission_id})
        out = []
        for n in payload.get("notes", []):
            if n.get("id") == submission_id:
                continue
            content = n.get("content", {})
            out.append({k: _unwrap(v) for k, v in content.items()})
        return out


def _value(note: dict, key: str):
    return _unwrap(note.get("content", {}).get(key))


def _unwrap(value):
    if isinstance(value, dict) and "value" in value:
        return value["value"]
    return value


def build_dump(platform: ReviewPlatform, venues: list[str] | None = None) -> list[dict]:
    """Merge submissions and reviews into flat records for dataset preparation."""
    venues = venues if venues is not None else platform.list_venues()
    dump: list[dict] = []
    for venue in venues:
        for sub in platform.list_submissions(venue):
            for review in platform.fetch_reviews(sub["id"]):
                rec = {
                    "paper_id": sub["id"],
                    "abstract": sub.get("abstract", ""),
                    "venue": sub.get("venue", venue),
                    "year": sub.get("year", ""),
                }
                rec.update(review)
                dump.append(rec)
    return dump


def save_dump(path, dump: list[dict]) -> None:
    write_records(path, [{"kind": "review_dump", **rec} for rec in dump])


def load_dump(path) -> list[dict]:
    out = []
    for _, rec in read_records(path):
        if rec.get("kind") == "review_dump":
            rec = {k: v for k, v in rec.items() if k != "kind"}
            out.append(rec)
    return out
