/** Fixture loading and a tiny in-memory stand-in for the session service. */

import sessionAfterTop from "../fixtures/session_after_top.json";
import sessionAwaiting from "../fixtures/session_awaiting.json";
import sessionTerminal from "../fixtures/session_terminal.json";
import type { SessionWire } from "../src/types";

const FIXTURES = {
  session_awaiting: sessionAwaiting,
  session_after_top: sessionAfterTop,
  session_terminal: sessionTerminal,
} as const;

/** Deep copy so tests can mutate their fixture freely. */
export function loadFixture(name: keyof typeof FIXTURES): SessionWire {
  return JSON.parse(JSON.stringify(FIXTURES[name])) as SessionWire;
}

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

/**
 * Replays recorded wire payloads behind a fetch-compatible function.
 * GET /sessions/{id} serves the current payload; a successful POST /step
 * advances to the next payload in the script.
 */
export class FakeService {
  calls: RecordedCall[] = [];
  private cursor = 0;
  /** When set, the next POST fails with this status/detail instead. */
  failNextStep: { status: number; detail: string } | null = null;
  /** When set, POST replies are delayed until the test releases them. */
  gate: Promise<void> | null = null;

  constructor(private script: SessionWire[]) {
    if (script.length === 0) throw new Error("script must not be empty");
  }

  private get current(): SessionWire {
    const item = this.script[this.cursor];
    if (!item) throw new Error("script exhausted");
    return item;
  }

  private json(payload: unknown, status = 200): Response {
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body ? (JSON.parse(String(init.body)) as unknown) : null;
    this.calls.push({ method, url, body });

    if (method === "GET" && /\/api\/v1\/sessions$/.test(url)) {
      const s = this.current;
      return this.json({
        sessions: [
          {
            id: s.id,
            incident_id: s.incident.id,
            status: s.status,
            steps: s.steps.length,
          },
        ],
      });
    }
    if (method === "GET" && url.includes("/api/v1/sessions/")) {
      return this.json(this.current);
    }
    if (method === "POST" && url.endsWith("/step")) {
      if (this.gate) await this.gate;
      if (this.failNextStep) {
        const { status, detail } = this.failNextStep;
        this.failNextStep = null;
        return this.json({ detail }, status);
      }
      if (this.cursor + 1 < this.script.length) this.cursor += 1;
      return this.json(this.current);
    }
    return this.json({ detail: `unexpected ${method} ${url}` }, 500);
  };

  posts(): RecordedCall[] {
    return this.calls.filter((c) => c.method === "POST");
  }

  gets(): RecordedCall[] {
    return this.calls.filter((c) => c.method === "GET");
  }
}
