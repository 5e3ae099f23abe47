/**
 * Idea Studio wiring: topic entry -> build progress -> path browser ->
 * trend panel -> curriculum checklist -> idea editor -> feedback panel.
 * Every state change round-trips through the service except checklist
 * toggles, which persist locally.
 */

import { StudioApi } from "./api.js";
import { ChecklistStore, MemoryStorage } from "./checklist.js";
import { ApiError } from "./errors.js";
import {
  enableIdeaEditor,
  renderCurriculum,
  renderError,
  renderFeedback,
  renderIdeaEditor,
  renderPathList,
  renderProgress,
  renderRoundHistory,
  renderTrendPanel,
} from "./render.js";
import type { PathView, SessionView } from "./types.js";

export class StudioApp {
  private session: SessionView | null = null;
  private readonly checklist: ChecklistStore;

  constructor(
    private readonly api: StudioApi,
    private readonly root: HTMLElement,
    storage?: ChecklistStore,
  ) {
    this.checklist = storage ??
      new ChecklistStore(typeof localStorage === "undefined"
        ? new MemoryStorage()
        : localStorage);
  }

  mount(): void {
    this.root.replaceChildren(this.topicScreen());
  }

  private section(id: string): HTMLElement {
    let node = this.root.querySelector<HTMLElement>(`#${id}`);
    if (!node) {
      node = document.createElement("div");
      node.id = id;
      this.root.append(node);
    }
    return node;
  }

  private showError(slot: string, err: unknown, onRetry?: () => void): void {
    const apiErr = err instanceof ApiError
      ? err
      : new ApiError("internal-error", String(err), 0);
    this.section(slot).replaceChildren(renderError(apiErr, onRetry));
  }

  private topicScreen(): HTMLElement {
    const form = document.createElement("section");
    form.className = "topic-entry";
    const h = document.createElement("h1");
    h.textContent = "Idea Studio";
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = "Research topic";
    const go = document.createElement("button");
    go.textContent = "Build knowledge graph";
    go.addEventListener("click", () => {
      const topic = input.value.trim();
      if (!topic) return;
      void this.startSession(topic);
    });
    form.append(h, input, go);
    return form;
  }

  async startSession(topic: string): Promise<void> {
    try {
      this.session = await this.api.createSession(topic);
      this.section("progress").replaceChildren(renderProgress(this.session));
      this.session = await this.api.pollSession(this.session.id);
      const summary = this.session.state === "ready"
        ? await this.api.graphSummary(this.session.id)
        : undefined;
      this.section("progress").replaceChildren(
        renderProgress(this.session, summary));
      if (this.session.state === "ready") {
        await this.explore();
      }
    } catch (err) {
      this.showError("progress", err, () => void this.startSession(topic));
    }
  }

  async explore(): Promise<void> {
    if (!this.session) return;
    const id = this.session.id;
    try {
      await this.api.explore(id);
      this.session = await this.api.pollSession(id);
      const paths = await this.api.listPaths(id);
      this.section("paths").replaceChildren(
        renderPathList(paths, (path) => void this.openPath(path)));
      if (paths.length) {
        await this.openPath(paths[0]);
      }
      this.mountIdeaLoop();
    } catch (err) {
      this.showError("paths", err, () => void this.explore());
    }
  }

  async openPath(path: PathView): Promise<void> {
    if (!this.session) return;
    const id = this.session.id;
    try {
      const [trend, curriculum] = await Promise.all([
        this.api.getTrend(id, path.fingerprint),
        this.api.getCurriculum(id, path.fingerprint),
      ]);
      this.section("trend").replaceChildren(renderTrendPanel(trend));
      this.section("curriculum").replaceChildren(
        renderCurriculum(id, curriculum, this.checklist));
    } catch (err) {
      this.showError("trend", err, () => void this.openPath(path));
    }
  }

  private mountIdeaLoop(): void {
    const editor = renderIdeaEditor({
      onSubmit: (idea) => void this.submitIdea(idea, editor),
    });
    this.section("editor").replaceChildren(editor);
    void this.refreshHistory();
  }

  async submitIdea(idea: string, editor: HTMLElement): Promise<void> {
    if (!this.session) return;
    try {
      const review = await this.api.submitIdea(this.session.id, idea);
      this.section("feedback").replaceChildren(renderFeedback(review));
      await this.refreshHistory();
    } catch (err) {
      this.showError("feedback", err);
    } finally {
      enableIdeaEditor(editor);
    }
  }

  async refreshHistory(): Promise<void> {
    if (!this.session) return;
    const history = await this.api.reviewHistory(this.session.id);
    this.section("history").replaceChildren(renderRoundHistory(history));
  }
}

export function bootstrap(baseUrl?: string): StudioApp {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app root element");
  const api = new StudioApi(baseUrl ?? "");
  const app = new StudioApp(api, root);
  app.mount();
  return app;
}

declare global {
  interface Window {
    GOAI_SERVICE_URL?: string;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("app")) {
  bootstrap(window.GOAI_SERVICE_URL ?? "");
}
