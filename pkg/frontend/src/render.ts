/**
 * Pure DOM builders for every screen; no fetching, no hidden state.
 * Each function takes server data (plus callbacks) and returns an element,
 * which keeps the whole surface unit-testable under jsdom.
 */

import { ChecklistStore } from "./checklist.js";
import { ApiError, describeError, isRetryable } from "./errors.js";
import type {
  CurriculumView,
  FeedbackView,
  GraphSummaryView,
  HopView,
  PathView,
  ReviewView,
  SessionView,
  TrendView,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

/** Five-class relation badge; the class name keys the color. */
export function relationBadge(hop: HopView): HTMLSpanElement {
  const badge = el("span", `badge badge-${hop.semantics.label.toLowerCase()}`);
  badge.textContent = hop.semantics.display;
  badge.title = `${hop.position.section_label} — ${hop.semantics.display}`;
  return badge;
}

export function renderProgress(session: SessionView,
                               summary?: GraphSummaryView): HTMLElement {
  const box = el("section", "progress");
  box.append(el("h2", "", `Session: ${session.topic}`));
  const state = el("p", `state state-${session.state}`, `state: ${session.state}`);
  box.append(state);
  if (session.error) box.append(el("p", "error-text", session.error));
  if (summary) {
    box.append(el("p", "graph-summary",
      `graph: ${summary.papers} papers, ${summary.quads} relations`));
  }
  return box;
}

function pathRibbon(path: PathView): HTMLElement {
  const ribbon = el("div", "ribbon");
  ribbon.append(el("span", "paper", path.hops[0]?.from_title ?? path.origin));
  for (const hop of path.hops) {
    const arrow = el("span", `arrow arrow-${hop.direction}`);
    arrow.textContent = hop.direction === "backward" ? "→" : "→";
    arrow.title = hop.direction;
    ribbon.append(arrow, relationBadge(hop), el("span", "paper", hop.to_title));
  }
  return ribbon;
}

export function renderPathList(
  paths: PathView[],
  onSelect: (path: PathView) => void,
): HTMLElement {
  const list = el("section", "paths");
  list.append(el("h2", "", "Research trajectories"));
  const ul = el("ul", "path-list");
  for (const path of paths) {
    const li = el("li", "path-item");
    li.dataset.fingerprint = path.fingerprint;
    li.append(el("span", "rank", `${path.rank}.`), pathRibbon(path));
    const pick = el("button", "select-path", "open");
    pick.addEventListener("click", () => onSelect(path));
    li.append(pick);
    ul.append(li);
  }
  list.append(ul);
  return list;
}

export function renderTrendPanel(trend: TrendView): HTMLElement {
  const panel = el("section", "trend");
  panel.append(el("h2", "", "Trend"));
  panel.append(el("p", "narrative", trend.narrative));
  const directions = el("ul", "directions");
  for (const d of trend.predicted_directions) {
    directions.append(el("li", "", d));
  }
  panel.append(directions);
  panel.append(el("h3", "", "Hint idea"));
  const idea = el("dl", "hint-idea");
  for (const [label, value] of [
    ["Motivation", trend.idea.motivation],
    ["Novelty", trend.idea.novelty],
    ["Method", trend.idea.method],
  ] as const) {
    idea.append(el("dt", "", label), el("dd", "", value));
  }
  panel.append(idea);
  return panel;
}

export function renderCurriculum(
  sessionId: string,
  curriculum: CurriculumView,
  checklist: ChecklistStore,
): HTMLElement {
  const panel = el("section", "curriculum");
  panel.append(el("h2", "", "Learning path"));
  const ol = el("ol", "curriculum-items");
  const done = checklist.completed(sessionId, curriculum.path_fingerprint);
  for (const item of curriculum.items) {
    const li = el("li", "curriculum-item");
    const box = el("input") as HTMLInputElement;
    box.type = "checkbox";
    box.checked = done.has(item.name);
    box.addEventListener("change", () => {
      checklist.toggle(sessionId, curriculum.path_fingerprint, item.name);
    });
    const label = el("label", `kind-${item.kind}`,
      ` ${item.complexity_rank}. ${item.name} [${item.kind}]`);
    label.prepend(box);
    li.append(label);
    ol.append(li);
  }
  panel.append(ol);
  return panel;
}

export function renderFeedback(review: ReviewView): HTMLElement {
  const panel = el("section", "feedback");
  panel.append(el("h2", "", `Round ${review.round}`));
  panel.append(el("p", `verdict verdict-${review.decision}`,
    `verdict: ${review.decision} (${review.promising_votes}/${review.feedback.length} ` +
    `votes, threshold ${review.threshold})`));
  for (const block of review.feedback) {
    panel.append(renderAgentBlock(block));
  }
  return panel;
}

function renderAgentBlock(block: FeedbackView): HTMLElement {
  const card = el("article", "agent-block");
  card.append(el("h3", "", `Reviewer ${block.agent_id} — score ${block.score}`));
  card.append(el("p", "summary", block.summary));
  card.append(el("p", "strengths", `Strengths: ${block.strengths}`));
  card.append(el("p", "weaknesses", `Weaknesses: ${block.weaknesses}`));
  return card;
}

export function renderRoundHistory(history: ReviewView[]): HTMLElement {
  const panel = el("section", "history");
  panel.append(el("h2", "", "Revision history"));
  const ol = el("ol", "rounds");
  for (const review of history) {
    const li = el("li", `round round-${review.decision}`);
    li.append(el("span", "round-no", `round ${review.round}: `),
      el("span", "round-verdict", review.decision),
      el("p", "round-idea", review.idea));
    ol.append(li);
  }
  panel.append(ol);
  return panel;
}

export interface IdeaEditorHooks {
  onSubmit: (idea: string) => void;
}

/** Idea editor with inline validation: empty input never reaches the wire. */
export function renderIdeaEditor(hooks: IdeaEditorHooks): HTMLElement {
  const panel = el("section", "idea-editor");
  panel.append(el("h2", "", "Propose an idea"));
  const textarea = el("textarea") as HTMLTextAreaElement;
  textarea.rows = 6;
  const note = el("p", "validation");
  const submit = el("button", "submit-idea", "Submit for review");
  submit.addEventListener("click", () => {
    const idea = textarea.value.trim();
    if (!idea) {
      note.textContent = "Write the idea before submitting.";
      return;
    }
    note.textContent = "";
    submit.disabled = true; // one in-flight submission at a time
    hooks.onSubmit(idea);
  });
  panel.append(textarea, note, submit);
  return panel;
}

export function enableIdeaEditor(panel: HTMLElement): void {
  const submit = panel.querySelector<HTMLButtonElement>("button.submit-idea");
  if (submit) submit.disabled = false;
}

export function renderError(err: ApiError, onRetry?: () => void): HTMLElement {
  const box = el("section", "error-box");
  box.append(el("p", "error-text", describeError(err)));
  if (onRetry && isRetryable(err)) {
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", onRetry);
    box.append(retry);
  }
  return box;
}
