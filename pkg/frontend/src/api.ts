/** Thin client for the /api/v1 session endpoints; the only write path. */

import {
  parseSession,
  PayloadError,
  SessionSummaryWire,
  SessionWire,
} from "./types";

export class HttpError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type Decision =
  | { candidate_index: number }
  | { override_action_text: string };

const BASE = "/api/v1";

async function request(path: string, init?: RequestInit): Promise<unknown> {
  const response = await fetch(`${BASE}${path}`, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body: unknown = await response.json();
      if (
        typeof body === "object" &&
        body !== null &&
        typeof (body as Record<string, unknown>)["detail"] === "string"
      ) {
        detail = (body as Record<string, string>)["detail"] ?? detail;
      }
    } catch {
      // non-JSON error body; keep the status code
    }
    throw new HttpError(response.status, detail);
  }
  try {
    return (await response.json()) as unknown;
  } catch {
    throw new PayloadError("server reply is not JSON");
  }
}

export async function listSessions(): Promise<SessionSummaryWire[]> {
  const data = await request("/sessions");
  if (
    typeof data !== "object" ||
    data === null ||
    !Array.isArray((data as Record<string, unknown>)["sessions"])
  ) {
    throw new PayloadError("session list reply lacks a sessions array");
  }
  return (data as { sessions: SessionSummaryWire[] }).sessions;
}

export async function getSession(id: string): Promise<SessionWire> {
  return parseSession(await request(`/sessions/${encodeURIComponent(id)}`));
}

export async function createSession(
  incident: unknown,
  config?: Record<string, unknown>,
): Promise<SessionWire> {
  return parseSession(
    await request("/sessions", {
      method: "POST",
      body: JSON.stringify(config ? { incident, config } : { incident }),
    }),
  );
}

export async function stepSession(
  id: string,
  decision: Decision,
): Promise<SessionWire> {
  return parseSession(
    await request(`/sessions/${encodeURIComponent(id)}/step`, {
      method: "POST",
      body: JSON.stringify(decision),
    }),
  );
}
