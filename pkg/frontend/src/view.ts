/** Pure DOM rendering: session JSON in, page state out. No fetching here. */

import { SessionView, STAGES } from "./types";

export interface DecisionHandlers {
  approve(serverIndex: number): void;
  override(text: string): void;
  retry(): void;
}

export interface RenderOptions {
  /** A decision is in flight; all controls disabled. */
  submitting: boolean;
  /** Inline problem to surface (HTTP failure, refused decision). */
  banner: string | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function section(title: string, className: string): HTMLElement {
  const wrap = el("section", className);
  wrap.appendChild(el("h2", undefined, title));
  return wrap;
}

function statusBadge(status: string): HTMLElement {
  const badge = el("span", `status status-${status}`, status.replace(/_/g, " "));
  return badge;
}

function renderBanner(message: string, handlers: DecisionHandlers): HTMLElement {
  const banner = el("div", "banner error");
  banner.appendChild(el("span", "message", message));
  const retry = el("button", "retry", "retry");
  retry.addEventListener("click", () => handlers.retry());
  banner.appendChild(retry);
  return banner;
}

function renderChecklist(view: SessionView): HTMLElement {
  const wrap = section("Recovery checklist", "checklist");
  const list = el("ul");
  for (const item of view.checklist) {
    const li = el("li", item.done ? "stage done" : "stage");
    li.dataset["stage"] = item.stage;
    const box = el("span", "box", item.done ? "☑" : "☐");
    li.appendChild(box);
    li.appendChild(el("span", "label", item.stage));
    list.appendChild(li);
  }
  wrap.appendChild(list);
  return wrap;
}

function renderCandidates(
  view: SessionView,
  handlers: DecisionHandlers,
  opts: RenderOptions,
): HTMLElement {
  const wrap = section("Candidate actions (best first)", "candidates");
  const disabled = !view.awaiting || opts.submitting;
  if (view.ranked.length === 0) {
    wrap.appendChild(el("p", "none", "no pending candidates"));
  }
  const list = el("ol");
  for (const ranked of view.ranked) {
    const li = el("li", "candidate");
    li.dataset["serverIndex"] = String(ranked.serverIndex);
    li.appendChild(el("span", "q", ranked.candidate.q_estimate.toFixed(2)));
    li.appendChild(el("span", "text", ranked.candidate.action.text));
    if (ranked.sparkline) {
      const spark = el("span", "spark", ranked.sparkline);
      spark.title = `${ranked.candidate.rollout_lengths.length} rollouts`;
      li.appendChild(spark);
    } else {
      li.appendChild(el("span", "spark exact", "exact"));
    }
    if (ranked.candidate.censored_count > 0) {
      li.appendChild(
        el("span", "censored", `${ranked.candidate.censored_count} censored`),
      );
    }
    const approve = el("button", "approve", "approve");
    approve.disabled = disabled;
    approve.addEventListener("click", () => handlers.approve(ranked.serverIndex));
    li.appendChild(approve);
    list.appendChild(li);
  }
  wrap.appendChild(list);

  const form = el("form", "override");
  const input = el("input");
  input.type = "text";
  input.placeholder = "override with a different action";
  input.disabled = disabled;
  const submit = el("button", "submit-override", "override");
  submit.type = "submit";
  submit.disabled = disabled;
  form.appendChild(input);
  form.appendChild(submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (input.value.trim()) handlers.override(input.value.trim());
  });
  wrap.appendChild(form);
  return wrap;
}

function renderSteps(view: SessionView): HTMLElement {
  const wrap = section("Executed steps", "steps");
  if (view.wire.steps.length === 0) {
    wrap.appendChild(el("p", "none", "no steps taken yet"));
    return wrap;
  }
  const list = el("ol");
  for (const step of view.wire.steps) {
    const li = el("li", "step");
    li.appendChild(el("span", "time", `t=${step.time_index}`));
    li.appendChild(el("span", "text", step.action.text));
    li.appendChild(el("span", "q", step.q_estimate.toFixed(2)));
    list.appendChild(li);
  }
  wrap.appendChild(list);
  return wrap;
}

function renderLogs(view: SessionView): HTMLElement {
  const wrap = section("Incident logs", "logs");
  const pre = el("pre");
  pre.textContent = view.wire.incident.logs.join("\n");
  wrap.appendChild(pre);
  return wrap;
}

function renderEnrichment(view: SessionView): HTMLElement {
  const wrap = section("Enrichment", "enrichment");
  const entries = view.wire.incident.enrichment;
  if (entries.length === 0) {
    wrap.appendChild(el("p", "none", "none"));
    return wrap;
  }
  const list = el("ul");
  for (const entry of entries) {
    const li = el("li", "entry");
    li.appendChild(el("span", "ioc", `${entry.ioc.kind} ${entry.ioc.value}`));
    li.appendChild(el("span", "source", entry.source));
    li.appendChild(el("span", "content", entry.content));
    list.appendChild(li);
  }
  wrap.appendChild(list);
  return wrap;
}

/** Replace root's content with the full session page. */
export function renderSession(
  root: HTMLElement,
  view: SessionView,
  handlers: DecisionHandlers,
  opts: RenderOptions,
): void {
  root.textContent = "";
  const page = el("div", "session");
  const header = el("header");
  header.appendChild(el("h1", undefined, `incident ${view.wire.incident.id}`));
  header.appendChild(statusBadge(view.wire.status));
  page.appendChild(header);
  if (opts.banner) page.appendChild(renderBanner(opts.banner, handlers));
  if (view.wire.error) {
    page.appendChild(el("div", "banner session-error", view.wire.error));
  }
  page.appendChild(renderChecklist(view));
  page.appendChild(renderCandidates(view, handlers, opts));
  page.appendChild(renderSteps(view));
  page.appendChild(renderLogs(view));
  page.appendChild(renderEnrichment(view));
  root.appendChild(page);
}

/** Full-page failure state (unreachable server, malformed payload). */
export function renderFailure(
  root: HTMLElement,
  message: string,
  handlers: Pick<DecisionHandlers, "retry">,
): void {
  root.textContent = "";
  const banner = el("div", "banner error fatal");
  banner.appendChild(el("span", "message", message));
  const retry = el("button", "retry", "retry");
  retry.addEventListener("click", () => handlers.retry());
  banner.appendChild(retry);
  root.appendChild(banner);
}

/** Landing page: pick an existing session. */
export function renderSessionList(
  root: HTMLElement,
  sessions: { id: string; incident_id: string; status: string; steps: number }[],
  open: (id: string) => void,
): void {
  root.textContent = "";
  const wrap = section("Sessions", "session-list");
  if (sessions.length === 0) {
    wrap.appendChild(
      el("p", "none", "no sessions yet; create one via the API or CLI"),
    );
  }
  const list = el("ul");
  for (const summary of sessions) {
    const li = el("li", "summary");
    const link = el("a", "open", `${summary.incident_id} (${summary.status}, ${summary.steps} steps)`);
    link.href = `#/sessions/${encodeURIComponent(summary.id)}`;
    link.addEventListener("click", (event) => {
      event.preventDefault();
      open(summary.id);
    });
    li.appendChild(link);
    list.appendChild(li);
  }
  wrap.appendChild(list);
  root.appendChild(wrap);
}

export { STAGES };
