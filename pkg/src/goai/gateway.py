"""Single seam for model interaction.

Prompt templates are versioned data files rendered with an injective
substitution (values are wrapped in braces with escaped delimiters, so two
different placeholder maps can never collide into the same prompt).
Completions go through one of two backends: a live chat-completions client
or a scripted table keyed by (template name, prompt digest) that makes the
whole pipeline bit-deterministic offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Protocol

from .errors import (
    GatewayTimeoutError,
    GatewayUnavailableError,
    MissingPlaceholderError,
    ParseFailureError,
    ScriptMissError,
)
from .records import dumps_canonical, read_records, write_records

log = logging.getLogger(__name__)

ENV_ENDPOINT = "GOAI_LLM_ENDPOINT"
ENV_MODEL = "GOAI_LLM_MODEL"
ENV_LLM_KEY = "GOAI_LLM_API_KEY"

#: retry budget for parse failures at call sites
PARSE_RETRIES = 3

_PLACEHOLDER = re.compile(r"(?<!\\)\{([a-zA-Z_][a-zA-Z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: int
    body: str
    required_placeholders: frozenset[str]

    @classmethod
    def from_body(cls, name: str, version: int, body: str) -> "PromptTemplate":
        return cls(name, version, body, frozenset(_PLACEHOLDER.findall(body)))

    def checksum(self) -> str:
        raw = f"{self.name}:{self.version}:{self.body}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


def _escape_value(value: str) -> str:
    # delimiter escape: braces inside values are doubled, so substituted text
    # can never form a placeholder pattern or forge a template-literal brace
    return value.replace("{", "{{").replace("}", "}}")


def render(template: PromptTemplate, values: Mapping[str, str]) -> str:
    """Substitute placeholders with delimiter-escaped values.

    Unknown extra keys are ignored; missing required keys raise with the
    full list of absent names.
    """
    missing = template.required_placeholders - set(values)
    if missing:
        raise MissingPlaceholderError(missing)

    def sub(match: re.Match) -> str:
        return _escape_value(str(values[match.group(1)]))

    return _PLACEHOLDER.sub(sub, template.body)


@dataclass(frozen=True)
class CompletionRequest:
    template_name: str
    values: Mapping[str, str]
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    backend_id: str
    latency: float
    prompt_tokens: int
    completion_tokens: int
    attempts: int = 1
    digest: str = ""


def prompt_digest(template_name: str, rendered: str) -> str:
    raw = f"{template_name}\n{rendered}"
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


class Backend(Protocol):
    backend_id: str

    def complete(self, template_name: str, rendered: str, temperature: float,
                 max_tokens: int) -> str: ...


class ScriptedBackend:
    """Replay table: (template name, prompt digest) -> canned response."""

    backend_id = "scripted"

    def __init__(self, entries: Mapping[tuple[str, str], str] | None = None):
        self._entries: dict[tuple[str, str], str] = dict(entries or {})

    def add(self, template_name: str, rendered: str, response: str) -> str:
        digest = prompt_digest(template_name, rendered)
        self._entries[(template_name, digest)] = response
        return digest

    def complete(self, template_name: str, rendered: str, temperature: float,
                 max_tokens: int) -> str:
        digest = prompt_digest(template_name, rendered)
        try:
            return self._entries[(template_name, digest)]
        except KeyError:
            raise ScriptMissError(
                f"no script entry for template {template_name!r} digest {digest}"
            ) from None

    def to_records(self) -> list[dict]:
        return [
            {"kind": "script", "template": t, "digest": d, "response": r}
            for (t, d), r in sorted(self._entries.items())
        ]

    def save(self, path: str | Path) -> None:
        write_records(path, self.to_records())

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedBackend":
        entries = {}
        for _, rec in read_records(path):
            if rec.get("kind") == "script":
                entries[(rec["template"], rec["digest"])] = rec["response"]
        return cls(entries)


class LiveBackend:
    """Chat-completions wire client with exponential backoff retries."""

    def __init__(self, endpoint: str | None = None, model: str | None = None,
                 api_key: str | None = None, max_attempts: int = 4,
                 timeout: float = 60.0, backoff: float = 1.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.api_key = api_key or os.environ.get(ENV_LLM_KEY, "")
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.backoff = backoff
        self.backend_id = f"live:{self.model or 'unset'}"
        if not self.endpoint:
            raise GatewayUnavailableError(f"{ENV_ENDPOINT} not configured")

    def complete(self, template_name: str, rendered: str, temperature: float,
                 max_tokens: int) -> str:
        import httpx

        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": rendered}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = httpx.post(self.endpoint, json=payload, headers=headers,
                                  timeout=self.timeout)
                if resp.status_code >= 500:
                    last_error = GatewayUnavailableError(f"upstream {resp.status_code}")
                    continue
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except httpx.TimeoutException as exc:
                last_error = GatewayTimeoutError(str(exc))
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = GatewayUnavailableError(str(exc))
        raise last_error or GatewayUnavailableError("exhausted retries")


class Gateway:
    """Template registry plus a backend; all pipeline prompts go through here."""

    def __init__(self, backend: Backend, templates: Mapping[str, PromptTemplate] | None = None):
        self.backend = backend
        self.templates: dict[str, PromptTemplate] = dict(templates or load_builtin_templates())

    @property
    def backend_id(self) -> str:
        return self.backend.backend_id

    def template(self, name: str) -> PromptTemplate:
        try:
            return self.templates[name]
        except KeyError:
            raise KeyError(f"unknown prompt template {name!r}") from None

    def render(self, template_name: str, values: Mapping[str, str]) -> str:
        return render(self.template(template_name), values)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        rendered = self.render(request.template_name, request.values)
        start = time.monotonic()
        attempts = 0
        while True:
            attempts += 1
            try:
                text = self.backend.complete(request.template_name, rendered,
                                             request.temperature, request.max_tokens)
                break
            except (GatewayUnavailableError, GatewayTimeoutError):
                # LiveBackend retries internally; anything surfacing here is final
                raise
        return CompletionResponse(
            text=text,
            backend_id=self.backend.backend_id,
            latency=time.monotonic() - start,
            prompt_tokens=len(rendered.split()),
            completion_tokens=len(text.split()),
            attempts=attempts,
            digest=prompt_digest(request.template_name, rendered),
        )

    def template_checksums(self) -> dict[str, str]:
        return {name: tpl.checksum() for name, tpl in sorted(self.templates.items())}


class RetryingBackend:
    """Wraps a backend with bounded retries; used around flaky transports."""

    def __init__(self, inner: Backend, max_attempts: int = 3):
        self.inner = inner
        self.max_attempts = max_attempts
        self.backend_id = inner.backend_id
        self.attempts_used = 0

    def complete(self, template_name: str, rendered: str, temperature: float,
                 max_tokens: int) -> str:
        last: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            self.attempts_used = attempt
            try:
                return self.inner.complete(template_name, rendered, temperature, max_tokens)
            except (GatewayUnavailableError, GatewayTimeoutError) as exc:
                last = exc
        raise last or GatewayUnavailableError("exhausted retries")


# --- structured-output parsing ----------------------------------------------

_ITEM_SPLIT = re.compile(r"[\n;]+")
_NUMBERED = re.compile(r"^\s*(?:\d+[.):]|[-*•])\s*(.*)$")
_MULTI_NUMBERED = re.compile(r"\d+[.)]")


def parse_choice(text: str, allowed: list[str]) -> list[str]:
    """Extract an ordered selection of option keys from free-form text.

    Accepts numbered lists, comma lists, space-separated keys, and
    prose-wrapped single choices, case-insensitively; anything outside
    ``allowed`` is ignored.  An empty extraction raises ParseFailureError.
    """
    if not allowed:
        raise ValueError("allowed set must be non-empty")
    chosen: list[str] = []
    seen: set[str] = set()

    def push(key: str | None) -> None:
        if key is not None and key not in seen:
            seen.add(key)
            chosen.append(key)

    for chunk in _ITEM_SPLIT.split(text or ""):
        chunk = chunk.strip()
        if not chunk:
            continue
        multi_numbered = len(_MULTI_NUMBERED.findall(chunk)) >= 2
        m = _NUMBERED.match(chunk)
        if m:
            chunk = m.group(1).strip()
        # comma/space lists count only when every element is a bare key;
        # otherwise the punctuation is ordinary prose
        for sep in (",", None):
            parts = [p.strip().strip("\"'`“”") for p in chunk.split(sep)]
            parts = [p for p in parts if p]
            if len(parts) > 1 and all(_exact_key(p, allowed) for p in parts):
                for p in parts:
                    push(_exact_key(p, allowed))
                break
        else:
            if multi_numbered:
                for key in _all_keys_in_order(chunk, allowed):
                    push(key)
            else:
                push(_match_key(chunk, allowed))
    if not chosen:
        raise ParseFailureError(f"no allowed key found in {text!r}")
    return chosen


def _exact_key(fragment: str, allowed: list[str]) -> str | None:
    frag = fragment.strip().strip(".:)\"'`“”").strip().casefold()
    for key in allowed:
        if frag == key.casefold():
            return key
    return None


def _match_key(chunk: str, allowed: list[str]) -> str | None:
    exact = _exact_key(chunk, allowed)
    if exact is not None:
        return exact
    hits = []
    for key in allowed:
        pos = _find_token(chunk, key)
        if pos >= 0:
            hits.append((pos, -len(key), key))
    if not hits:
        return None
    hits.sort()
    return hits[0][2]


def _all_keys_in_order(chunk: str, allowed: list[str]) -> list[str]:
    hits = []
    for key in allowed:
        start = 0
        while True:
            pos = _find_token(chunk, key, start)
            if pos < 0:
                break
            hits.append((pos, -len(key), key))
            start = pos + len(key)
    hits.sort()
    # drop shorter keys nested inside a longer hit at the same position
    out, covered = [], -1
    for pos, neg_len, key in hits:
        if pos > covered:
            out.append(key)
            covered = pos + len(key) - 1
    return out


def _find_token(chunk: str, key: str, start: int = 0) -> int:
    """Position of key in chunk (case-insensitive, non-word boundaries)."""
    low, needle = chunk.casefold(), key.casefold()
    while True:
        pos = low.find(needle, start)
        if pos < 0:
            return -1
        before = chunk[pos - 1] if pos > 0 else " "
        after_idx = pos + len(key)
        after = chunk[after_idx] if after_idx < len(chunk) else " "
        if not (before.isalnum() or before == "_") and not (after.isalnum() or after == "_"):
            return pos
        start = pos + 1


# --- tagged-block parsing (shared by synthesis and reviewer) ------------------

def extract_tag(raw: str, tag: str) -> tuple[str, int] | None:
    """Return (content, start offset) of the first <tag>...</tag> block."""
    m = re.search(rf"<{tag}>(.*?)</{tag}>", raw, flags=re.DOTALL | re.IGNORECASE)
    if m is None:
        return None
    return m.group(1).strip(), m.start()


# --- template loading ---------------------------------------------------------

def load_builtin_templates() -> dict[str, PromptTemplate]:
    raw = resources.files("goai").joinpath("prompts/templates.json").read_text("utf-8")
    return _templates_from_json(raw)


def load_templates_file(path: str | Path) -> dict[str, PromptTemplate]:
    return _templates_from_json(Path(path).read_text(encoding="utf-8"))


def _templates_from_json(raw: str) -> dict[str, PromptTemplate]:
    data = json.loads(raw)
    out = {}
    for item in data["templates"]:
        tpl = PromptTemplate.from_body(item["name"], item["version"], item["body"])
        out[tpl.name] = tpl
    return out


def scripted_gateway(script_path: str | Path | None = None,
                     entries: Mapping[tuple[str, str], str] | None = None) -> Gateway:
    backend = ScriptedBackend.load(script_path) if script_path else ScriptedBackend(entries)
    return Gateway(backend)
