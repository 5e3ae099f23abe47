#!/usr/bin/env python3
"""Regenerate the shipped fixture artifacts under fixtures/."""

from pathlib import Path

from goai.fixtures import write_fixture_dir

if __name__ == "__main__":
    target = Path(__file__).resolve().parents[1] / "fixtures"
    paths = write_fixture_dir(target)
    for name, path in sorted(paths.items()):
        print(f"{name:>14}: {path}")
