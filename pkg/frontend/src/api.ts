import { ApiError } from "./errors.js";
import type {
  ApiErrorBody,
  CurriculumView,
  GraphSummaryView,
  PathView,
  ReviewView,
  SessionState,
  SessionView,
  TrendView,
} from "./types.js";

/** Typed client for the session service; all state lives server-side. */
export class StudioApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError("upstream-unavailable", String(err), 0);
    }
    if (!response.ok) {
      let code = "internal-error";
      let message = `HTTP ${response.status}`;
      try {
        const parsed = (await response.json()) as ApiErrorBody;
        if (parsed?.error?.code) {
          code = parsed.error.code;
          message = parsed.error.message;
        }
      } catch {
        // non-JSON error body; keep the HTTP status text
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  createSession(topic: string): Promise<SessionView> {
    return this.request("POST", "/sessions", { topic });
  }

  listSessions(): Promise<SessionView[]> {
    return this.request("GET", "/sessions");
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  graphSummary(id: string): Promise<GraphSummaryView> {
    return this.request("GET", `/sessions/${id}/graph`);
  }

  explore(id: string, query = ""): Promise<SessionView> {
    return this.request("POST", `/sessions/${id}/explore`, query ? { query } : {});
  }

  listPaths(id: string): Promise<PathView[]> {
    return this.request("GET", `/sessions/${id}/paths`);
  }

  getTrend(id: string, fingerprint: string): Promise<TrendView> {
    return this.request("GET", `/sessions/${id}/paths/${fingerprint}/trend`);
  }

  getCurriculum(id: string, fingerprint: string): Promise<CurriculumView> {
    return this.request("GET", `/sessions/${id}/paths/${fingerprint}/curriculum`);
  }

  submitIdea(id: string, idea: string): Promise<ReviewView> {
    return this.request("POST", `/sessions/${id}/ideas`, { idea });
  }

  reviewHistory(id: string): Promise<ReviewView[]> {
    return this.request("GET", `/sessions/${id}/ideas`);
  }

  /** Poll the session until it reaches one of the given states. */
  async pollSession(
    id: string,
    until: SessionState[] = ["ready", "failed"],
    opts: { intervalMs?: number; timeoutMs?: number } = {},
  ): Promise<SessionView> {
    const interval = opts.intervalMs ?? 400;
    const deadline = Date.now() + (opts.timeoutMs ?? 60_000);
    for (;;) {
      const session = await this.getSession(id);
      if (until.includes(session.state)) return session;
      if (Date.now() > deadline) {
        throw new ApiError("timeout", `session ${id} still ${session.state}`, 0);
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
