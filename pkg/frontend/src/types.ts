/** Wire JSON types for the session API, plus the derived display view. */

export const STAGES = [
  "containment",
  "assessment",
  "preservation",
  "eviction",
  "hardening",
  "restoration",
] as const;

export type Stage = (typeof STAGES)[number];

export type RecoveryStateWire = Record<Stage, boolean>;

export interface ActionWire {
  text: string;
  synthetic_id?: number | null;
  unnecessary?: boolean;
}

export interface CandidateWire {
  action: ActionWire;
  q_estimate: number;
  rollout_lengths: number[];
  censored_count: number;
}

export interface StepWire {
  time_index: number;
  action: ActionWire;
  q_estimate: number;
  state_before: RecoveryStateWire;
  state_after: RecoveryStateWire;
  candidates: CandidateWire[];
}

export interface IocWire {
  kind: string;
  value: string;
  source_line: number;
}

export interface EnrichmentWire {
  ioc: IocWire;
  source: string;
  content: string;
}

export interface IncidentWire {
  id: string;
  system_description: string;
  summary?: string | null;
  logs: string[];
  iocs: IocWire[];
  enrichment: EnrichmentWire[];
}

export interface SessionWire {
  id: string;
  status: string;
  incident: IncidentWire;
  config: Record<string, unknown>;
  current_state: RecoveryStateWire;
  steps: StepWire[];
  pending_candidates: CandidateWire[];
  error: string | null;
}

export interface SessionSummaryWire {
  id: string;
  incident_id: string;
  status: string;
  steps: number;
}

/** Raised when a server reply does not look like a session. */
export class PayloadError extends Error {}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function checkState(value: unknown, where: string): RecoveryStateWire {
  if (!isRecord(value)) {
    throw new PayloadError(`${where}: recovery state is not an object`);
  }
  for (const stage of STAGES) {
    if (typeof value[stage] !== "boolean") {
      throw new PayloadError(`${where}: stage '${stage}' missing or not boolean`);
    }
  }
  return value as RecoveryStateWire;
}

function checkCandidate(value: unknown, where: string): CandidateWire {
  if (!isRecord(value)) throw new PayloadError(`${where}: candidate is not an object`);
  const action = value["action"];
  if (!isRecord(action) || typeof action["text"] !== "string") {
    throw new PayloadError(`${where}: candidate has no action text`);
  }
  if (typeof value["q_estimate"] !== "number" || !isFinite(value["q_estimate"])) {
    throw new PayloadError(`${where}: candidate q_estimate is not a number`);
  }
  if (!Array.isArray(value["rollout_lengths"])) {
    throw new PayloadError(`${where}: candidate rollout_lengths is not an array`);
  }
  return value as unknown as CandidateWire;
}

/**
 * Structural check over a server reply. Deliberately shallow: enough to make
 * rendering safe, tolerant of extra fields the server may grow.
 */
export function parseSession(data: unknown): SessionWire {
  if (!isRecord(data)) throw new PayloadError("session payload is not an object");
  if (typeof data["id"] !== "string" || typeof data["status"] !== "string") {
    throw new PayloadError("session payload lacks id/status");
  }
  checkState(data["current_state"], `session ${data["id"]}`);
  if (!Array.isArray(data["steps"]) || !Array.isArray(data["pending_candidates"])) {
    throw new PayloadError("session payload lacks steps/pending_candidates arrays");
  }
  for (const c of data["pending_candidates"]) checkCandidate(c, `session ${data["id"]}`);
  const incident = data["incident"];
  if (!isRecord(incident) || !Array.isArray(incident["logs"])) {
    throw new PayloadError("session payload lacks an incident with logs");
  }
  return data as unknown as SessionWire;
}

export interface RankedCandidate {
  /** Index in the server's pending_candidates order; what the step API wants. */
  serverIndex: number;
  candidate: CandidateWire;
  sparkline: string;
}

export interface ChecklistItem {
  stage: Stage;
  done: boolean;
}

export interface SessionView {
  wire: SessionWire;
  /** Always exactly six entries, fixed stage order. */
  checklist: ChecklistItem[];
  /** Candidates ascending by estimate; ties keep server order. */
  ranked: RankedCandidate[];
  awaiting: boolean;
}

const SPARK_GLYPHS = "▁▂▃▄▅▆▇█";

/** Compact per-candidate picture of its rollout length distribution. */
export function sparkline(lengths: number[]): string {
  if (lengths.length === 0) return "";
  const lo = Math.min(...lengths);
  const hi = Math.max(...lengths);
  const span = hi - lo;
  return lengths
    .map((value) => {
      const t = span === 0 ? 0.5 : (value - lo) / span;
      const slot = Math.min(SPARK_GLYPHS.length - 1, Math.floor(t * SPARK_GLYPHS.length));
      return SPARK_GLYPHS[slot];
    })
    .join("");
}

export function toView(wire: SessionWire): SessionView {
  const checklist = STAGES.map((stage) => ({
    stage,
    done: wire.current_state[stage],
  }));
  const ranked = wire.pending_candidates
    .map((candidate, serverIndex) => ({
      serverIndex,
      candidate,
      sparkline: sparkline(candidate.rollout_lengths),
    }))
    .sort(
      (a, b) =>
        a.candidate.q_estimate - b.candidate.q_estimate ||
        a.serverIndex - b.serverIndex,
    );
  return {
    wire,
    checklist,
    ranked,
    awaiting: wire.status === "awaiting_decision",
  };
}
