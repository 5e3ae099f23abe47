#!/usr/bin/env python3
"""Start the service against the shipped fixtures (offline demo mode).

Writes a config file under the data dir and launches uvicorn; the Idea
Studio frontend and its end-to-end tests point at this server.
"""

import argparse
import json
from pathlib import Path

from goai import fixtures
from goai.records import dumps_canonical

ROOT = Path(__file__).resolve().parents[1]


def build_config(data_dir: Path, fixture_dir: Path) -> dict:
    if not (fixture_dir / "fig2.network.jsonl").exists():
        fixtures.write_fixture_dir(fixture_dir)
    return {
        "data_dir": str(data_dir),
        "backend": "fixture",
        "network_path": str(fixture_dir / "fig2.network.jsonl"),
        "script_path": str(fixture_dir / "fig2.script"),
        "sections_path": str(fixture_dir / "fig2.sections.jsonl"),
        "explore_query": fixtures.QUERY,
        "explore_width": fixtures.WIDTH,
        "explore_depth": fixtures.DEPTH,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--data-dir", default=str(ROOT / "data"))
    args = parser.parse_args()

    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    config = build_config(data_dir, ROOT / "fixtures")
    config_path = data_dir / "service_config.json"
    config_path.write_text(dumps_canonical(config) + "\n", encoding="utf-8")

    import uvicorn

    from goai.service import ServiceConfig, create_app

    app = create_app(ServiceConfig.load(config_path))
    print(f"fixture service on http://{args.host}:{args.port} "
          f"(topic: {fixtures.TOPIC!r}, demo idea in fixtures.DEMO_IDEA)")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
