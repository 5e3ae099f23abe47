"""GoAI: citation-semantic knowledge graphs, research-trajectory search, and
staged idea review."""

from .store import (
    CitationPosition,
    CitationSemantics,
    GoAIQuad,
    PaperNode,
    PaperStore,
)

__all__ = [
    "CitationPosition",
    "CitationSemantics",
    "GoAIQuad",
    "PaperNode",
    "PaperStore",
]

__version__ = "0.1.0"
