// Mounting and the polling loop. Event delegation keeps the rendered HTML
// dumb; every user action round-trips to the server before anything changes
// on screen.

import { StationClient } from "./client.js";
import { ConsoleStore } from "./state.js";
import { renderConsole } from "./views.js";
import type { ConsoleConfig } from "./types.js";

export const DEFAULT_POLL_MS = 5_000;

export function createStore(config: ConsoleConfig): ConsoleStore {
  return new ConsoleStore(new StationClient(config));
}

export function mountConsole(
  rootElement: HTMLElement,
  store: ConsoleStore,
  pollIntervalMs: number = DEFAULT_POLL_MS,
): () => void {
  store.subscribe((state) => {
    rootElement.innerHTML = renderConsole(state);
  });

  rootElement.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (!action || target.tagName !== "BUTTON") return;
    if (action === "approve") void store.approve(target.dataset.request!, 1);
    if (action === "deny") void store.deny(target.dataset.request!);
    if (action === "claim") void store.claim(target.dataset.task!);
  });

  rootElement.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    event.preventDefault();
    if (form.dataset.action === "watch") {
      const input = form.elements.namedItem("fingerprint") as HTMLInputElement;
      store.watch(input.value);
      void store.refresh();
      return;
    }
    if (form.dataset.action === "answer") {
      const taskId = form.dataset.task!;
      let content = "";
      if (form.dataset.kind === "join_disambiguation") {
        const chosen = form.querySelector<HTMLInputElement>("input[type=radio]:checked");
        if (!chosen) return;
        content = chosen.value;
      } else {
        const text = form.querySelector<HTMLTextAreaElement>("textarea");
        content = text?.value ?? "";
        if (!content.trim()) return;
      }
      void store.answer(taskId, content);
    }
  });

  void store.refresh();
  const timer = setInterval(() => void store.refresh(), pollIntervalMs);
  return () => clearInterval(timer);
}
