"""Exception types shared across the pipeline.

Every error carries a stable machine-readable ``code`` so the CLI and the
service can surface it without string-matching messages.
"""

from __future__ import annotations


class GoaiError(Exception):
    """Base class; ``code`` is the wire-level error identifier."""

    code = "internal-error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# --- paper store ------------------------------------------------------------

class DuplicatePaperError(GoaiError):
    code = "duplicate-id-conflict"


class InvalidNodeError(GoaiError):
    code = "invalid-node"


class MissingEndpointError(GoaiError):
    code = "missing-endpoint"


class SelfCitationError(GoaiError):
    code = "self-citation"


class InvalidSemanticsError(GoaiError):
    code = "invalid-semantics-label"


class UnknownEntityError(GoaiError):
    code = "unknown-entity"


class MalformedSnapshotError(GoaiError):
    code = "malformed-snapshot"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# --- ingest / upstream ------------------------------------------------------

class UpstreamUnavailableError(GoaiError):
    code = "upstream-unavailable"


class QuotaExceededError(GoaiError):
    code = "quota-exceeded"


class EmbedderFailureError(GoaiError):
    code = "embedder-failure"


class InvalidConfigError(GoaiError):
    code = "invalid-config"


# --- gateway ----------------------------------------------------------------

class MissingPlaceholderError(GoaiError):
    code = "missing-placeholder"

    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(f"missing placeholders: {', '.join(self.names)}")


class ScriptMissError(GoaiError):
    code = "script-miss"


class GatewayTimeoutError(GoaiError):
    code = "timeout"


class GatewayUnavailableError(GoaiError):
    code = "gateway-unavailable"


class ParseFailureError(GoaiError):
    code = "parse-failure"


class EmptyOutputError(GoaiError):
    code = "empty-output"


# --- reviewer ---------------------------------------------------------------

class MalformedReviewError(GoaiError):
    code = "malformed-review"


class MissingStageError(MalformedReviewError):
    code = "missing-stage"

    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"missing stage: {stage}")


class OutOfOrderStagesError(MalformedReviewError):
    code = "out-of-order-stages"


class NonIntegerScoreError(MalformedReviewError):
    code = "non-integer-score"


class EmptyResultsError(GoaiError):
    code = "empty-results"


class MalformedDumpError(GoaiError):
    code = "malformed-dump"


class LengthMismatchError(GoaiError):
    code = "length-mismatch"


class ZeroVarianceError(GoaiError):
    code = "zero-variance"


# --- service ----------------------------------------------------------------

class SessionNotReadyError(GoaiError):
    code = "session-not-ready"


class RoundCapExceededError(GoaiError):
    code = "round-cap-exceeded"


class NotFoundError(GoaiError):
    code = "not-found"


class NotReadyError(GoaiError):
    code = "not-ready"
