/**
 * View models mirroring the service response schemas one-to-one.
 * The client never computes verdicts, ranks, or labels; every rendered
 * number and badge traces back to a service field.
 */

export type SessionState = "ingesting" | "ready" | "exploring" | "failed";

export interface SessionView {
  id: string;
  topic: string;
  state: SessionState;
  created_at: number;
  error: string;
  rounds: number;
  key_ref: string;
  graph_ref: string;
  beam_ref: string;
}

export interface GraphSummaryView {
  papers: number;
  quads: number;
}

export interface PositionView {
  section_label: string;
  raw_heading: string;
}

export interface SemanticsView {
  label: string;
  display: string;
  evidence: string;
  confidence: number;
}

export interface HopView {
  from_entity: string;
  from_title: string;
  to_entity: string;
  to_title: string;
  direction: "backward" | "forward";
  position: PositionView;
  semantics: SemanticsView;
}

export interface PathView {
  rank: number;
  fingerprint: string;
  origin: string;
  sort_value: number;
  score_trace: Array<[number, number]>;
  hops: HopView[];
}

export interface IdeaView {
  motivation: string;
  novelty: string;
  method: string;
}

export interface TrendView {
  path_fingerprint: string;
  narrative: string;
  predicted_directions: string[];
  idea: IdeaView;
}

export interface CurriculumItemView {
  name: string;
  kind: "concept" | "skill" | "tool";
  source_paper: string;
  complexity_rank: number;
}

export interface CurriculumView {
  path_fingerprint: string;
  items: CurriculumItemView[];
}

export interface FeedbackView {
  agent_id: string;
  summary: string;
  strengths: string;
  weaknesses: string;
  score: number;
}

export interface ReviewView {
  round: number;
  idea: string;
  decision: "promising" | "unpromising";
  promising_votes: number;
  threshold: number;
  feedback: FeedbackView[];
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
