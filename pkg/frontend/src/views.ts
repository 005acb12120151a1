// Pure renderers: console state in, HTML string out. Only metadata, task
// text, and decisions are ever rendered; there is no code path that could
// show a data row.

import type { ConsoleState } from "./state.js";
import type { AccessRequest, CapsuleStatus, HumanTask } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function short(id: string): string {
  return escapeHtml(id.length > 12 ? `${id.slice(0, 12)}…` : id);
}

export function renderApprovalQueue(requests: AccessRequest[]): string {
  const pending = requests.filter((r) => r.status === "pending");
  const decided = requests.filter((r) => r.status !== "pending");
  const rows = pending.map(
    (r) => `
    <li class="request" data-request="${escapeHtml(r.id)}">
      <span>${escapeHtml(r.requester)} asks for dataset ${short(r.dataset)}</span>
      <button data-action="approve" data-request="${escapeHtml(r.id)}">approve</button>
      <button data-action="deny" data-request="${escapeHtml(r.id)}">deny</button>
    </li>`,
  );
  const history = decided.map(
    (r) => `<li class="decided">${short(r.id)}: ${escapeHtml(r.status)}</li>`,
  );
  return `
  <section id="approval-queue">
    <h2>Approval queue (${pending.length} pending)</h2>
    <ul>${rows.join("") || "<li>nothing pending</li>"}</ul>
    <ul class="history">${history.join("")}</ul>
  </section>`;
}

export function renderTaskInbox(openTasks: HumanTask[], myTasks: HumanTask[]): string {
  const open = openTasks.map((task) => {
    const form =
      task.kind === "join_disambiguation"
        ? task.alternatives
            .map(
              (alt, i) => `
        <label><input type="radio" name="alt-${escapeHtml(task.id)}" value="${i}">
          ${escapeHtml(alt.description)}</label>`,
            )
            .join("")
        : `<textarea name="why-${escapeHtml(task.id)}" placeholder="explain the dataset's purpose"></textarea>`;
    return `
    <li class="task" data-task="${escapeHtml(task.id)}">
      <pre>${escapeHtml(task.description)}</pre>
      <span class="price">${task.price} units</span>
      <button data-action="claim" data-task="${escapeHtml(task.id)}">claim</button>
      <form data-action="answer" data-task="${escapeHtml(task.id)}" data-kind="${escapeHtml(task.kind)}">
        ${form}
        <button type="submit">answer</button>
      </form>
    </li>`;
  });
  const mine = myTasks.map(
    (t) => `<li>${short(t.id)} (${escapeHtml(t.kind)}): ${escapeHtml(t.status)}</li>`,
  );
  return `
  <section id="task-inbox">
    <h2>Task inbox (${openTasks.length} open)</h2>
    <ul>${open.join("") || "<li>no open tasks</li>"}</ul>
    <h3>Tasks I requested</h3>
    <ul>${mine.join("") || "<li>none</li>"}</ul>
  </section>`;
}

export function renderLedgerPanel(state: ConsoleState): string {
  const ledger = state.ledger;
  if (!ledger) {
    return `<section id="ledger-panel"><h2>Ledger</h2><p>not loaded</p></section>`;
  }
  return `
  <section id="ledger-panel">
    <h2>Ledger: ${escapeHtml(ledger.user)}</h2>
    <p>balance <strong>${ledger.balance}</strong> units
       (escrowed ${ledger.escrowed}, available ${ledger.available})</p>
  </section>`;
}

export function renderCapsuleBoard(state: ConsoleState): string {
  const rows = state.watched.map((fp) => {
    const capsule: CapsuleStatus | undefined = state.capsules[fp];
    if (!capsule) {
      return `<li>${short(fp)}: unknown</li>`;
    }
    const tasks = capsule.task_ids
      .map((tid) => `<a href="#task-${escapeHtml(tid)}">${short(tid)}</a>`)
      .join(", ");
    const suffix = capsule.status === "blocked" ? ` — blocked on ${tasks}` : "";
    return `<li class="capsule-${escapeHtml(capsule.status)}">${short(fp)}:
      <strong>${escapeHtml(capsule.status)}</strong>${suffix}</li>`;
  });
  return `
  <section id="capsule-board">
    <h2>Capsule board</h2>
    <form data-action="watch">
      <input name="fingerprint" placeholder="capsule fingerprint">
      <button type="submit">watch</button>
    </form>
    <ul>${rows.join("") || "<li>no capsules watched</li>"}</ul>
  </section>`;
}

export function renderError(state: ConsoleState): string {
  if (!state.lastError) return "";
  return `<div id="error" role="alert">${escapeHtml(state.lastError)}</div>`;
}

export function renderConsole(state: ConsoleState): string {
  return [
    renderError(state),
    renderApprovalQueue(state.requests),
    renderTaskInbox(state.openTasks, state.myTasks),
    renderLedgerPanel(state),
    renderCapsuleBoard(state),
  ].join("\n");
}
