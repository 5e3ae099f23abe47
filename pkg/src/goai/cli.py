"""Batch driver for every pipeline stage and the service.

Each command writes its primary artifact plus a RunManifest pinning the
config digest, template checksums, backend id, and input digests, so two
runs with identical manifests produce byte-identical outputs under
scripted backends.  Exit codes: 0 success, 1 pipeline error (machine code
on stderr), 2 usage.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .citations import load_sections
from .errors import GoaiError
from .explorer import (
    load_paths,
    path_to_record,
    replay_trace,
    run_exploration,
    save_paths,
)
from .gateway import Gateway, ScriptedBackend, LiveBackend, load_builtin_templates
from .ingest import ExpansionConfig
from .manifest import build_manifest
from .pipeline import build_graph, classify_graph
from .records import dumps_canonical
from .review_platform import load_dump
from .reviewer import (
    correlation_report,
    multi_agent_review,
    prepare_sft_dataset,
    save_sft_dataset,
    validate_learning_path,
)
from .scholarly import CachedHttpBackend, FixtureBackend, FixtureNetwork, ResponseCache
from .store import PaperStore, SEMANTIC_DISPLAY
from .synthesis import load_bundles, render_report, save_bundles, synthesize_path


def _gateway(script: str | None) -> Gateway:
    templates = load_builtin_templates()
    if script:
        return Gateway(ScriptedBackend.load(script), templates)
    return Gateway(LiveBackend(), templates)


def _write_manifest(command: str, config: dict, inputs: list, outputs: list,
                    manifest_path: Path, gateway: Gateway | None = None,
                    backend_id: str = "") -> None:
    manifest = build_manifest(
        command=command,
        config=config,
        inputs=inputs,
        outputs=outputs,
        base_dir=manifest_path.parent,
        template_checksums=gateway.template_checksums() if gateway else {},
        backend_id=(gateway.backend_id if gateway else backend_id),
    )
    manifest.write(manifest_path)


def pipeline_command(fn):
    """Surface GoaiError as exit 1 with the machine code on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except GoaiError as exc:
            click.echo(f"error {exc.code}: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--jobs", default=1, show_default=True, help="Worker fan-out cap.")
@click.option("--records", is_flag=True, help="Emit line-delimited records on stdout.")
@click.pass_context
def main(ctx, jobs, records):
    """Citation-graph building, trajectory search, synthesis, and review."""
    ctx.obj = {"jobs": jobs, "records": records}


def _emit(ctx, human_lines: list[str], record_objs: list[dict]) -> None:
    if ctx.obj["records"]:
        for rec in record_objs:
            click.echo(dumps_canonical(rec))
    else:
        for line in human_lines:
            click.echo(line)


@main.command()
@click.option("--topic", required=True)
@click.option("--backend", "backend_kind", type=click.Choice(["fixture", "semantic_scholar"]),
              default="fixture", show_default=True)
@click.option("--network", type=click.Path(exists=True, dir_okay=False),
              help="Fixture citation network (fixture backend).")
@click.option("--cache", type=click.Path(dir_okay=False), help="Upstream response cache.")
@click.option("--recorded-only", is_flag=True, help="Serve exclusively from the cache.")
@click.option("--k", default=4, show_default=True, help="Papers kept per expansion step.")
@click.option("--n", default=2, show_default=True, help="Max steps per direction.")
@click.option("--floor", default=0.0, show_default=True, help="Relevance floor.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def ingest(ctx, topic, backend_kind, network, cache, recorded_only, k, n, floor, out):
    """Search a topic and expand the citation graph around the key reference."""
    if backend_kind == "fixture":
        if not network:
            raise click.UsageError("--network is required with the fixture backend")
        backend = FixtureBackend(FixtureNetwork.load(network))
    else:
        import os

        from .scholarly import ENV_CACHE_DIR

        default_cache = Path(os.environ.get(ENV_CACHE_DIR, ".")) / "upstream_cache.jsonl"
        backend = CachedHttpBackend(ResponseCache(cache or default_cache),
                                    recorded_only=recorded_only)
    config = ExpansionConfig(K=k, N=n, relevance_floor=floor, topic=topic)
    store, delta, key_ref = build_graph(topic, config, backend)
    out_path = Path(out)
    store.save(out_path)
    _write_manifest("ingest",
                    {"topic": topic, "k": k, "n": n, "floor": floor,
                     "backend": backend_kind},
                    [p for p in [network, cache] if p], [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"),
                    backend_id=backend.backend_id)
    _emit(ctx,
          [f"key reference: {key_ref}",
           f"papers added: {len(delta.added_papers)}  quads added: {len(delta.added_quads)}",
           f"steps taken (backward, forward): {delta.steps_taken}",
           f"graph written to {out}"],
          [{"kind": "ingest_result", "key_ref": key_ref,
            "papers_added": len(delta.added_papers),
            "quads_added": len(delta.added_quads),
            "steps_taken": list(delta.steps_taken), "out": str(out)}])


@main.command()
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sections", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--script", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def classify(ctx, graph, sections, script, out):
    """Label citation mentions and replace ingest placeholder relations."""
    store = PaperStore.load(graph)
    gateway = _gateway(script)
    n = classify_graph(store, load_sections(sections), gateway)
    out_path = Path(out)
    store.save(out_path)
    _write_manifest("classify", {},
                    [graph, sections] + ([script] if script else []),
                    [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"), gateway)
    _emit(ctx,
          [f"classified quads admitted: {n}", f"graph written to {out}"],
          [{"kind": "classify_result", "classified": n, "out": str(out)}])


@main.command()
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--key", "key_ref", required=True, help="Key reference paper id.")
@click.option("--query", default="", help="Exploration query (defaults to key title).")
@click.option("--width", default=5, show_default=True)
@click.option("--depth", default=1, show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--trace", type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def explore(ctx, graph, key_ref, query, width, depth, script, out, trace):
    """Beam-search research trajectories from a key reference."""
    store = PaperStore.load(graph)
    gateway = _gateway(script)
    query = query or store.get_paper(key_ref).title
    result = run_exploration(key_ref, query, width, depth, store,
                             gateway=gateway, trace_path=trace)
    out_path = Path(out)
    save_paths(out_path, result.paths)
    outputs = [out_path] + ([Path(trace)] if trace else [])
    _write_manifest("explore",
                    {"key": key_ref, "query": query, "width": width, "depth": depth},
                    [graph] + ([script] if script else []), outputs,
                    out_path.with_suffix(out_path.suffix + ".manifest.json"), gateway)
    human = []
    for rank, path in enumerate(result.paths, start=1):
        hops = " ".join(
            f"-({h.position.section_label}, {SEMANTIC_DISPLAY[h.semantics.label]})"
            f" [{h.direction}]-> {h.to_entity}"
            for h in path.hops)
        human.append(f"{rank}. {path.origin} {hops}".rstrip())
    if result.truncated:
        human.append("warning: exploration truncated by gateway exhaustion")
    _emit(ctx, human + [f"paths written to {out}"],
          [path_to_record(p) for p in result.paths])


@main.command()
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--paths", "paths_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--query", default="")
@click.option("--script", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--report-dir", type=click.Path(file_okay=False))
@click.pass_context
@pipeline_command
def synthesize(ctx, graph, paths_file, query, script, out, report_dir):
    """Generate trend, hint idea, and learning path per trajectory."""
    store = PaperStore.load(graph)
    gateway = _gateway(script)
    paths = [p for p in load_paths(paths_file) if p.hops]
    bundles = [synthesize_path(p, store, gateway, query) for p in paths]
    out_path = Path(out)
    save_bundles(out_path, bundles)
    outputs = [out_path]
    if report_dir:
        report_root = Path(report_dir)
        report_root.mkdir(parents=True, exist_ok=True)
        for path, bundle in zip(paths, bundles):
            report_path = report_root / f"{bundle.trend.path_fingerprint}.md"
            report_path.write_text(render_report(bundle, path, store), encoding="utf-8")
            outputs.append(report_path)
    _write_manifest("synthesize", {"query": query},
                    [graph, paths_file] + ([script] if script else []), outputs,
                    out_path.with_suffix(out_path.suffix + ".manifest.json"), gateway)
    _emit(ctx,
          [f"synthesized {len(bundles)} bundles -> {out}"],
          [{"kind": "synthesize_result", "bundles": len(bundles), "out": str(out)}])


@main.command()
@click.option("--idea", default=None)
@click.option("--idea-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--abstract", default="")
@click.option("--abstract-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--agents", default=3, show_default=True)
@click.option("--threshold", default=5, show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def review(ctx, idea, idea_file, abstract, abstract_file, agents, threshold, script, out):
    """Run the staged multi-agent review of an idea."""
    if idea is None and idea_file is None:
        raise click.UsageError("provide --idea or --idea-file")
    idea_text = idea if idea is not None else Path(idea_file).read_text("utf-8").strip()
    abstract_text = (Path(abstract_file).read_text("utf-8").strip()
                     if abstract_file else abstract)
    gateway = _gateway(script)
    verdict = multi_agent_review(idea_text, abstract_text, gateway,
                                 agents=agents, threshold=threshold,
                                 jobs=ctx.obj["jobs"])
    out_path = Path(out)
    recs = [{
        "kind": "verdict", "decision": verdict.decision,
        "promising_votes": verdict.promising_votes, "threshold": verdict.threshold,
    }] + [{
        "kind": "review", "agent_id": r.agent_id, "score": r.score,
        "summary": r.summary, "strengths": r.strengths, "weaknesses": r.weaknesses,
    } for r in verdict.per_agent]
    from .records import write_records
    write_records(out_path, recs)
    _write_manifest("review", {"agents": agents, "threshold": threshold},
                    [p for p in [idea_file, abstract_file, script] if p], [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"), gateway)
    human = [f"verdict: {verdict.decision} "
             f"({verdict.promising_votes}/{len(verdict.per_agent)} votes, "
             f"threshold {verdict.threshold})"]
    human += [f"  {r.agent_id}: score {r.score} — {r.summary}" for r in verdict.per_agent]
    _emit(ctx, human, recs)


@main.command("validate-path")
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--bundles", "bundles_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--fingerprint", default=None, help="Path fingerprint (default: first).")
@click.option("--agents", default=3, show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def validate_path(ctx, graph, bundles_file, fingerprint, agents, script, out):
    """Audit a learning path with majority-vote agents."""
    store = PaperStore.load(graph)
    gateway = _gateway(script)
    bundles = load_bundles(bundles_file)
    if not bundles:
        raise click.UsageError("bundles file holds no complete bundle")
    fingerprint = fingerprint or sorted(bundles)[0]
    if fingerprint not in bundles:
        raise click.UsageError(f"no bundle for fingerprint {fingerprint}")
    curriculum = bundles[fingerprint].curriculum
    source_ids = list(dict.fromkeys(it.source_paper for it in curriculum.items))
    source_papers = [store.get_paper(pid) for pid in source_ids]
    validated, verdict = validate_learning_path(curriculum, source_papers, gateway,
                                                agents=agents, jobs=ctx.obj["jobs"])
    out_path = Path(out)
    from .records import write_records
    write_records(out_path, [{
        "kind": "validated_learning_path",
        "path_fingerprint": fingerprint,
        "decision": verdict.decision,
        "promising_votes": verdict.promising_votes,
        "items": [{"name": it.name, "item_kind": it.kind,
                   "source_paper": it.source_paper,
                   "complexity_rank": it.complexity_rank}
                  for it in validated.items],
    }])
    _write_manifest("validate-path", {"agents": agents, "fingerprint": fingerprint},
                    [graph, bundles_file] + ([script] if script else []), [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"), gateway)
    _emit(ctx,
          [f"decision: {verdict.decision}; {len(validated.items)} items kept"],
          [{"kind": "validate_result", "decision": verdict.decision,
            "items": len(validated.items)}])


@main.command("prepare-dataset")
@click.option("--dump", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def prepare_dataset(ctx, dump, out):
    """Map a review-platform dump onto golden three-stage training records."""
    records, skipped = prepare_sft_dataset(load_dump(dump))
    out_path = Path(out)
    save_sft_dataset(out_path, records, skipped)
    _write_manifest("prepare-dataset", {}, [dump], [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"))
    skip_note = ", ".join(f"{k}={v}" for k, v in sorted(skipped.items())) or "none"
    _emit(ctx,
          [f"exported {len(records)} records; skipped: {skip_note}"],
          [{"kind": "prepare_result", "exported": len(records),
            "skipped": dict(sorted(skipped.items()))}])


@main.command("evaluate-correlation")
@click.option("--pairs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def evaluate_correlation(ctx, pairs, out):
    """Pearson correlation between model and human scores."""
    report = correlation_report(pairs)
    out_path = Path(out)
    out_path.write_text(dumps_canonical({"kind": "correlation_report", **report}) + "\n",
                        encoding="utf-8")
    _write_manifest("evaluate-correlation", {}, [pairs], [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"))
    _emit(ctx,
          [f"n={report['n']}  pearson={report['pearson']:.4f}"],
          [{"kind": "correlation_report", **report}])


@main.command("replay-trace")
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--trace", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@pipeline_command
def replay_trace_cmd(ctx, graph, trace, out):
    """Re-run an exploration from its trace; output matches the original run."""
    store = PaperStore.load(graph)
    result = replay_trace(trace, store)
    out_path = Path(out)
    save_paths(out_path, result.paths)
    _write_manifest("replay-trace", {}, [graph, trace], [out_path],
                    out_path.with_suffix(out_path.suffix + ".manifest.json"))
    _emit(ctx,
          [f"replayed {len(result.paths)} paths -> {out}"],
          [path_to_record(p) for p in result.paths])


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@pipeline_command
def serve(config_path, host, port):
    """Run the session service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(config_path)
    app = create_app(config)
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest("serve", {"host": host, "port": port}, [config_path], [],
                    data_dir / "serve.manifest.json",
                    backend_id=app.state.manager.gateway.backend_id)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
