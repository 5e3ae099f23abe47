"""Long-running API around the pipeline: sessions, jobs, persistence.

Sessions are file-backed directories of line-delimited records; background
jobs (graph build, exploration) run on threads and report progress through
the persisted session state, which clients poll.  Restarting the process
reloads every session from disk unchanged.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .citations import load_sections
from .errors import (
    GoaiError,
    InvalidConfigError,
    NotFoundError,
    NotReadyError,
    RoundCapExceededError,
    SessionNotReadyError,
)
from .explorer import load_paths, path_to_record, run_exploration, save_paths
from .gateway import Gateway, ScriptedBackend, LiveBackend, load_builtin_templates
from .ingest import ExpansionConfig
from .pipeline import build_graph, classify_graph
from .records import dumps_canonical, read_records
from .reviewer import multi_agent_review
from .scholarly import CachedHttpBackend, FixtureBackend, FixtureNetwork, ResponseCache
from .store import PaperStore, SEMANTIC_DISPLAY
from .synthesis import load_bundles, save_bundles, synthesize_path

log = logging.getLogger(__name__)

STATES = ("ingesting", "ready", "exploring", "failed")


@dataclass
class ServiceConfig:
    data_dir: str
    backend: str = "fixture"
    network_path: str | None = None
    script_path: str | None = None
    sections_path: str | None = None
    graph_snapshot: str | None = None
    cache_path: str | None = None
    expansion_k: int = 4
    expansion_n: int = 2
    relevance_floor: float = 0.0
    explore_width: int = 5
    explore_depth: int = 1
    explore_query: str = ""
    agents: int = 3
    threshold: int = 5
    round_cap: int = 10
    jobs: int = 1

    @classmethod
    def load(cls, path: str | Path) -> "ServiceConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)


@dataclass
class Session:
    id: str
    topic: str
    state: str = "ingesting"
    created_at: float = 0.0
    error: str = ""
    rounds: int = 0
    key_ref: str = ""

    def view(self) -> dict:
        return {
            "id": self.id,
            "topic": self.topic,
            "state": self.state,
            "created_at": self.created_at,
            "error": self.error,
            "rounds": self.rounds,
            "key_ref": self.key_ref,
            "graph_ref": "graph.snapshot",
            "beam_ref": "trace.jsonl",
        }


class SessionManager:
    """Owns session state, persistence, and the background job threads."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.root = Path(config.data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._stores: dict[str, PaperStore] = {}
        self._manager_lock = threading.Lock()
        self.gateway = self._build_gateway()
        self.backend = self._build_backend()
        self._reload()

    # --- wiring -----------------------------------------------------------

    def _build_gateway(self) -> Gateway:
        templates = load_builtin_templates()
        if self.config.script_path:
            return Gateway(ScriptedBackend.load(self.config.script_path), templates)
        return Gateway(LiveBackend(), templates)

    def _build_backend(self):
        if self.config.backend == "fixture":
            if not self.config.network_path:
                raise InvalidConfigError("fixture backend needs network_path")
            return FixtureBackend(FixtureNetwork.load(self.config.network_path))
        cache = ResponseCache(self.config.cache_path or
                              str(Path(self.config.data_dir) / "upstream_cache.jsonl"))
        return CachedHttpBackend(cache)

    def _reload(self) -> None:
        for sess_dir in sorted(self.root.iterdir() if self.root.exists() else []):
            meta = sess_dir / "session.json"
            if not meta.exists():
                continue
            data = json.loads(meta.read_text(encoding="utf-8"))
            session = Session(**data)
            # a crash mid-job leaves a transitional state; mark it failed
            if session.state in ("ingesting", "exploring"):
                session.state = "failed"
                session.error = "interrupted by restart"
                self._persist_meta(session)
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()

    # --- helpers ----------------------------------------------------------

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _persist_meta(self, session: Session) -> None:
        payload = {
            "id": session.id, "topic": session.topic, "state": session.state,
            "created_at": session.created_at, "error": session.error,
            "rounds": session.rounds, "key_ref": session.key_ref,
        }
        path = self._dir(session.id) / "session.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(dumps_canonical(payload) + "\n", encoding="utf-8")
        tmp.replace(path)

    def _get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None

    def _store_for(self, session_id: str) -> PaperStore:
        if session_id not in self._stores:
            snap = self._dir(session_id) / "graph.snapshot"
            if not snap.exists():
                raise NotReadyError("graph not built yet")
            self._stores[session_id] = PaperStore.load(snap)
        return self._stores[session_id]

    # --- session lifecycle --------------------------------------------------

    def create_session(self, topic: str, background: bool = True) -> Session:
        if not topic or not topic.strip():
            raise InvalidConfigError("topic must be non-empty")
        session = Session(id=uuid.uuid4().hex[:12], topic=topic.strip(),
                          created_at=time.time())
        self._dir(session.id).mkdir(parents=True, exist_ok=True)
        with self._manager_lock:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        self._persist_meta(session)
        if background:
            threading.Thread(target=self._build_job, args=(session.id,),
                             daemon=True).start()
        else:
            self._build_job(session.id)
        return session

    def _build_job(self, session_id: str) -> None:
        session = self._get(session_id)
        try:
            if self.config.graph_snapshot:
                store = PaperStore.load(self.config.graph_snapshot)
                key_ref = ""
            else:
                cfg = ExpansionConfig(K=self.config.expansion_k, N=self.config.expansion_n,
                                      relevance_floor=self.config.relevance_floor,
                                      topic=session.topic)
                store, _delta, key_ref = build_graph(session.topic, cfg, self.backend)
                if self.config.sections_path:
                    classify_graph(store, load_sections(self.config.sections_path),
                                   self.gateway)
            store.save(self._dir(session_id) / "graph.snapshot")
            with self._locks[session_id]:
                self._stores[session_id] = store
                session.key_ref = key_ref
                session.state = "ready"
                self._persist_meta(session)
        except Exception as exc:  # failed is terminal; error surfaces to clients
            log.exception("build job failed for session %s", session_id)
            with self._locks[session_id]:
                session.state = "failed"
                session.error = str(exc)
                self._persist_meta(session)

    def trigger_exploration(self, session_id: str, query: str = "",
                            background: bool = True) -> Session:
        session = self._get(session_id)
        with self._locks[session_id]:
            if session.state != "ready":
                raise SessionNotReadyError(f"session state is {session.state}")
            session.state = "exploring"
            self._persist_meta(session)
        if background:
            threading.Thread(target=self._explore_job, args=(session_id, query),
                             daemon=True).start()
        else:
            self._explore_job(session_id, query)
        return session

    def _explore_job(self, session_id: str, query: str) -> None:
        session = self._get(session_id)
        try:
            store = self._store_for(session_id)
            key_ref = session.key_ref or self._pick_key_ref(store)
            effective_query = query or self.config.explore_query or session.topic
            result = run_exploration(
                key_ref=key_ref,
                query=effective_query,
                width=self.config.explore_width,
                max_depth=self.config.explore_depth,
                store=store,
                gateway=self.gateway,
                trace_path=self._dir(session_id) / "trace.jsonl",
            )
            save_paths(self._dir(session_id) / "paths.jsonl", result.paths)
            bundles = [synthesize_path(p, store, self.gateway, effective_query)
                       for p in result.paths if p.hops]
            save_bundles(self._dir(session_id) / "bundles.jsonl", bundles)
            with self._locks[session_id]:
                session.state = "ready"
                self._persist_meta(session)
        except Exception as exc:
            log.exception("explore job failed for session %s", session_id)
            with self._locks[session_id]:
                session.state = "failed"
                session.error = str(exc)
                self._persist_meta(session)

    @staticmethod
    def _pick_key_ref(store: PaperStore) -> str:
        papers = store.papers()
        if not papers:
            raise NotReadyError("graph is empty")
        # densest node: the natural key reference of a preloaded snapshot
        return max(papers, key=lambda p: (len(store.neighbors(p.id)), p.id)).id

    # --- reads ---------------------------------------------------------------

    def list_sessions(self) -> list[dict]:
        return [s.view() for s in sorted(self._sessions.values(),
                                         key=lambda s: (s.created_at, s.id))]

    def session_view(self, session_id: str) -> dict:
        return self._get(session_id).view()

    def graph_summary(self, session_id: str) -> dict:
        self._get(session_id)
        store = self._store_for(session_id)
        return {"papers": store.paper_count, "quads": store.quad_count}

    def list_paths(self, session_id: str) -> list[dict]:
        self._get(session_id)
        paths_file = self._dir(session_id) / "paths.jsonl"
        if not paths_file.exists():
            raise NotReadyError("exploration has not completed")
        out = []
        store = self._store_for(session_id)
        for rank, path in enumerate(load_paths(paths_file), start=1):
            rec = path_to_record(path)
            rec["rank"] = rank
            for hop in rec["hops"]:
                hop["semantics"]["display"] = SEMANTIC_DISPLAY[hop["semantics"]["label"]]
                hop["from_title"] = store.get_paper(hop["from_entity"]).title
                hop["to_title"] = store.get_paper(hop["to_entity"]).title
            out.append(rec)
        return out

    def _bundle(self, session_id: str, fingerprint: str):
        self._get(session_id)
        bundles_file = self._dir(session_id) / "bundles.jsonl"
        if not bundles_file.exists():
            raise NotReadyError("synthesis has not completed")
        bundles = load_bundles(bundles_file)
        if fingerprint not in bundles:
            raise NotFoundError(f"no artifacts for path {fingerprint!r}")
        return bundles[fingerprint]

    def get_trend(self, session_id: str, fingerprint: str) -> dict:
        bundle = self._bundle(session_id, fingerprint)
        return {
            "path_fingerprint": fingerprint,
            "narrative": bundle.trend.narrative,
            "predicted_directions": list(bundle.trend.predicted_directions),
            "idea": {
                "motivation": bundle.idea.motivation,
                "novelty": bundle.idea.novelty,
                "method": bundle.idea.method,
            },
        }

    def get_curriculum(self, session_id: str, fingerprint: str) -> dict:
        bundle = self._bundle(session_id, fingerprint)
        return {
            "path_fingerprint": fingerprint,
            "items": [
                {"name": it.name, "kind": it.kind, "source_paper": it.source_paper,
                 "complexity_rank": it.complexity_rank}
                for it in bundle.curriculum.items
            ],
        }

    # --- idea loop -------------------------------------------------------------

    def submit_idea(self, session_id: str, idea: str) -> dict:
        if not idea or not idea.strip():
            raise InvalidConfigError("idea must be non-empty")
        session = self._get(session_id)
        with self._locks[session_id]:
            if session.state != "ready":
                raise SessionNotReadyError(f"session state is {session.state}")
            if session.rounds >= self.config.round_cap:
                raise RoundCapExceededError(
                    f"round cap {self.config.round_cap} reached")
            round_no = session.rounds + 1
            verdict = multi_agent_review(idea.strip(), "", self.gateway,
                                         agents=self.config.agents,
                                         threshold=self.config.threshold,
                                         jobs=self.config.jobs)
            record = {
                "kind": "idea",
                "round": round_no,
                "idea": idea.strip(),
                "decision": verdict.decision,
                "promising_votes": verdict.promising_votes,
                "threshold": verdict.threshold,
                "feedback": [
                    {"agent_id": r.agent_id, "summary": r.summary,
                     "strengths": r.strengths, "weaknesses": r.weaknesses,
                     "score": r.score}
                    for r in verdict.per_agent
                ],
            }
            ideas_file = self._dir(session_id) / "ideas.jsonl"
            new_file = not ideas_file.exists()
            with ideas_file.open("a", encoding="utf-8") as fh:
                if new_file:
                    fh.write(dumps_canonical({"kind": "header", "schema_version": 1}) + "\n")
                fh.write(dumps_canonical(record) + "\n")
            session.rounds = round_no
            self._persist_meta(session)
        return {k: v for k, v in record.items() if k != "kind"}

    def review_history(self, session_id: str) -> list[dict]:
        self._get(session_id)
        ideas_file = self._dir(session_id) / "ideas.jsonl"
        if not ideas_file.exists():
            return []
        return [{k: v for k, v in rec.items() if k != "kind"}
                for _, rec in read_records(ideas_file) if rec.get("kind") == "idea"]


# --- HTTP app ------------------------------------------------------------------

_STATUS = {
    "invalid-config": 400,
    "not-found": 404,
    "session-not-ready": 409,
    "not-ready": 409,
    "round-cap-exceeded": 429,
}


def create_app(config: ServiceConfig):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="goai", version="0.1.0")
    manager = SessionManager(config)
    app.state.manager = manager

    @app.exception_handler(GoaiError)
    async def goai_error_handler(request: Request, exc: GoaiError):
        return JSONResponse(
            status_code=_STATUS.get(exc.code, 500),
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    @app.post("/sessions")
    def create_session(body: dict):
        session = manager.create_session(str(body.get("topic", "")))
        return session.view()

    @app.get("/sessions")
    def list_sessions():
        return manager.list_sessions()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return manager.session_view(session_id)

    @app.get("/sessions/{session_id}/graph")
    def graph_summary(session_id: str):
        return manager.graph_summary(session_id)

    @app.post("/sessions/{session_id}/explore")
    def trigger_exploration(session_id: str, body: dict | None = None):
        query = str((body or {}).get("query", ""))
        return manager.trigger_exploration(session_id, query).view()

    @app.get("/sessions/{session_id}/paths")
    def list_paths(session_id: str):
        return manager.list_paths(session_id)

    @app.get("/sessions/{session_id}/paths/{fingerprint}/trend")
    def get_trend(session_id: str, fingerprint: str):
        return manager.get_trend(session_id, fingerprint)

    @app.get("/sessions/{session_id}/paths/{fingerprint}/curriculum")
    def get_curriculum(session_id: str, fingerprint: str):
        return manager.get_curriculum(session_id, fingerprint)

    @app.post("/sessions/{session_id}/ideas")
    def submit_idea(session_id: str, body: dict):
        return manager.submit_idea(session_id, str(body.get("idea", "")))

    @app.get("/sessions/{session_id}/ideas")
    def review_history(session_id: str):
        return manager.review_history(session_id)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    return app
