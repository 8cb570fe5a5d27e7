/**
 * Controller: wires the API to the views.
 *
 * State is never kept that a plain GET could not rebuild; every render is a
 * function of the last fetched session plus two ephemeral flags (a decision
 * in flight, an error banner). Sessions are human-paced, so updates arrive
 * by 1 s polling, paused while a decision is in flight.
 */

import { Decision, getSession, HttpError, listSessions, stepSession } from "./api";
import { PayloadError, SessionWire, toView } from "./types";
import {
  DecisionHandlers,
  renderFailure,
  renderSession,
  renderSessionList,
} from "./view";

export interface AppOptions {
  /** Open this session directly; default reads location.hash. */
  sessionId?: string;
  /** Poll interval in ms; 0 disables polling (tests drive refresh()). */
  pollMs?: number;
}

export interface AppHandle {
  refresh(): Promise<void>;
  stop(): void;
}

function hashSessionId(): string | null {
  const match = /^#\/sessions\/(.+)$/.exec(window.location.hash);
  return match?.[1] ? decodeURIComponent(match[1]) : null;
}

function describe(error: unknown): string {
  if (error instanceof HttpError) {
    return `server refused the request (HTTP ${error.status}): ${error.message}`;
  }
  if (error instanceof PayloadError) {
    return `malformed server reply: ${error.message}`;
  }
  return `request failed: ${String(error)}`;
}

export function startApp(root: HTMLElement, opts: AppOptions = {}): AppHandle {
  const pollMs = opts.pollMs ?? 1000;
  let sessionId: string | null = opts.sessionId ?? hashSessionId();
  let current: SessionWire | null = null;
  let submitting = false;
  let banner: string | null = null;
  let lastFailed: (() => void) | null = null;

  const handlers: DecisionHandlers = {
    approve(serverIndex) {
      void decide({ candidate_index: serverIndex });
    },
    override(text) {
      void decide({ override_action_text: text });
    },
    retry() {
      banner = null;
      const rerun = lastFailed;
      lastFailed = null;
      if (rerun) rerun();
      else void refresh();
    },
  };

  function render(): void {
    if (current) {
      renderSession(root, toView(current), handlers, { submitting, banner });
    }
  }

  async function decide(decision: Decision): Promise<void> {
    // one in-flight decision per session; extra clicks are ignored
    if (!sessionId || submitting) return;
    submitting = true;
    render();
    try {
      current = await stepSession(sessionId, decision);
      banner = null;
      lastFailed = null;
    } catch (error) {
      banner = describe(error);
      lastFailed = () => {
        void decide(decision);
      };
    }
    submitting = false;
    render();
  }

  async function refresh(): Promise<void> {
    if (!sessionId) {
      try {
        const sessions = await listSessions();
        renderSessionList(root, sessions, (id) => {
          sessionId = id;
          window.location.hash = `#/sessions/${encodeURIComponent(id)}`;
          void refresh();
        });
      } catch (error) {
        renderFailure(root, describe(error), handlers);
      }
      return;
    }
    try {
      current = await getSession(sessionId);
      render();
    } catch (error) {
      if (current) {
        banner = describe(error);
        render();
      } else {
        renderFailure(root, describe(error), handlers);
      }
    }
  }

  const onHashChange = (): void => {
    sessionId = hashSessionId();
    current = null;
    void refresh();
  };
  window.addEventListener("hashchange", onHashChange);

  let timer: ReturnType<typeof setInterval> | null = null;
  if (pollMs > 0) {
    timer = setInterval(() => {
      if (!submitting) void refresh();
    }, pollMs);
  }

  void refresh();

  return {
    refresh,
    stop() {
      if (timer !== null) clearInterval(timer);
      window.removeEventListener("hashchange", onHashChange);
    },
  };
}

// browser entry point; tests import startApp and mount their own root
const mount = typeof document !== "undefined" ? document.getElementById("app") : null;
if (mount && !mount.dataset["testHarness"]) {
  startApp(mount);
}
