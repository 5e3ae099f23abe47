"""Normalization of raw section headings to the nine canonical labels.

The mapping lives in a versioned data file (``data/section_labels.json``);
headings that match no rule map to ``Other``.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

SECTION_LABELS = (
    "Introduction",
    "Background",
    "RelatedWork",
    "Method",
    "Experiments",
    "Discussion",
    "Conclusion",
    "Appendix",
    "Other",
)

# leading enumeration, e.g. "3.", "IV.", "A.2", "1)"
_NUMBERING = re.compile(r"^\s*(?:[0-9]+(?:\.[0-9]+)*|[IVXLC]+|[A-Z])\s*[.):]\s*")


@lru_cache(maxsize=1)
def _rules() -> list[tuple[str, tuple[str, ...]]]:
    raw = resources.files("goai").joinpath("data/section_labels.json").read_text("utf-8")
    table = json.loads(raw)
    return [(rule["label"], tuple(rule["keywords"])) for rule in table["rules"]]


@lru_cache(maxsize=1)
def table_version() -> int:
    raw = resources.files("goai").joinpath("data/section_labels.json").read_text("utf-8")
    return json.loads(raw)["version"]


def normalize_heading(raw_heading: str) -> str:
    """Map a raw heading to one of the nine canonical section labels."""
    text = _NUMBERING.sub("", raw_heading or "").strip().lower()
    for label, keywords in _rules():
        for kw in keywords:
            if kw in text:
                return label
    return "Other"
