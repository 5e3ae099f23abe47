/**
 * End-to-end smoke against the real fixture service: topic -> five paths
 * with relation badges -> curriculum render -> idea submission with three
 * feedback blocks and a verdict. Runs headless (spawned uvicorn + jsdom).
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

import { JSDOM } from "jsdom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { StudioApi } from "../src/api.js";
import { ChecklistStore, MemoryStorage } from "../src/checklist.js";
import {
  renderCurriculum,
  renderFeedback,
  renderPathList,
  renderRoundHistory,
} from "../src/render.js";

const REPO_ROOT = resolve(fileURLToPath(import.meta.url), "../../..");
const PORT = 8870 + (process.pid % 97);
const BASE = `http://127.0.0.1:${PORT}`;
const TOPIC = "LLM reasoning";

// must match the fixture script table (goai.fixtures.DEMO_IDEA); any drift
// fails loudly with a script-miss from the service
const DEMO_IDEA =
  "Blend inference-time tree search with preference-distilled training: run a small " +
  "search over candidate reasoning branches only where a learned value head is " +
  "uncertain, and distill the resolved branches back into the policy between tasks.";

let server: ChildProcess;
let dataDir: string;

async function waitForHealth(api: StudioApi, timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      await api.health();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error("service never became healthy");
      await new Promise((r) => setTimeout(r, 250));
    }
  }
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "goai-e2e-"));
  server = spawn(
    "python3",
    [join(REPO_ROOT, "scripts", "serve_fixture.py"),
     "--port", String(PORT), "--data-dir", dataDir],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr?.on("data", (chunk: Buffer) => {
    const text = chunk.toString();
    if (text.includes("Traceback")) console.error(text);
  });
  const dom = new JSDOM("<!DOCTYPE html><div id='app'></div>");
  (globalThis as Record<string, unknown>).document = dom.window.document;
  (globalThis as Record<string, unknown>).Event = dom.window.Event;
  await waitForHealth(new StudioApi(BASE));
}, 90_000);

afterAll(() => {
  server?.kill("SIGTERM");
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("idea studio against the fixture service", () => {
  const api = new StudioApi(BASE);

  it("runs the full student loop", { timeout: 120_000 }, async () => {
    // topic entry -> build
    let session = await api.createSession(TOPIC);
    expect(session.state).toBe("ingesting");
    session = await api.pollSession(session.id);
    expect(session.state).toBe("ready");
    expect(await api.graphSummary(session.id)).toEqual({ papers: 9, quads: 8 });

    // exploration -> path browser with badges
    await api.explore(session.id);
    session = await api.pollSession(session.id);
    expect(session.state).toBe("ready");
    const paths = await api.listPaths(session.id);
    expect(paths).toHaveLength(5);

    const listEl = renderPathList(paths, () => undefined);
    const badges = [...listEl.querySelectorAll(".badge")].map((b) => b.textContent);
    expect(badges).toEqual(["B&E", "C&A", "C&A", "B&E", "B&E"]);
    const ribbonText = listEl.textContent ?? "";
    expect(ribbonText).toContain("Tree of Thoughts");
    expect(ribbonText).toContain("Self-Consistency");

    // trend + curriculum render
    const first = paths[0];
    const trend = await api.getTrend(session.id, first.fingerprint);
    expect(trend.narrative.length).toBeGreaterThan(0);
    expect(trend.idea.motivation.length).toBeGreaterThan(0);

    const curriculum = await api.getCurriculum(session.id, first.fingerprint);
    const ranks = curriculum.items.map((i) => i.complexity_rank);
    expect(ranks).toEqual([...ranks].sort((a, b) => a - b));
    const checklist = new ChecklistStore(new MemoryStorage());
    const curriculumEl = renderCurriculum(session.id, curriculum, checklist);
    expect(curriculumEl.querySelectorAll("li.curriculum-item"))
      .toHaveLength(curriculum.items.length);

    // idea submission -> three feedback blocks + verdict
    const review = await api.submitIdea(session.id, DEMO_IDEA);
    expect(review.decision).toBe("promising");
    expect(review.feedback).toHaveLength(3);
    const feedbackEl = renderFeedback(review);
    expect(feedbackEl.querySelectorAll("article.agent-block")).toHaveLength(3);
    expect(feedbackEl.querySelector(".verdict")!.textContent)
      .toContain("promising (2/3 votes, threshold 5)");

    // round history ordering matches persisted rounds
    await api.submitIdea(session.id, DEMO_IDEA);
    const history = await api.reviewHistory(session.id);
    expect(history.map((h) => h.round)).toEqual([1, 2]);
    const historyEl = renderRoundHistory(history);
    expect(historyEl.querySelectorAll("li.round")).toHaveLength(2);
  });

  it("surfaces machine-readable errors through the catalog", async () => {
    const { ApiError, describeError } = await import("../src/errors.js");
    try {
      await api.getSession("does-not-exist");
      expect.unreachable("expected a 404");
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      const apiErr = err as InstanceType<typeof ApiError>;
      expect(apiErr.code).toBe("not-found");
      expect(describeError(apiErr)).toContain("[not-found]");
    }
  });
});
