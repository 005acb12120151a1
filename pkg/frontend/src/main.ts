// Bootstrap: read the two config fields (base URL, identity secret) from a
// small form, then mount the console.

import { createStore, mountConsole, DEFAULT_POLL_MS } from "./app.js";

function boot(): void {
  const setup = document.getElementById("setup") as HTMLFormElement;
  const root = document.getElementById("console") as HTMLElement;
  let unmount: (() => void) | null = null;

  setup.addEventListener("submit", (event) => {
    event.preventDefault();
    const baseUrl = (setup.elements.namedItem("baseUrl") as HTMLInputElement).value;
    const identitySecret = (setup.elements.namedItem("secret") as HTMLInputElement).value;
    unmount?.();
    const store = createStore({ baseUrl, identitySecret });
    unmount = mountConsole(root, store, DEFAULT_POLL_MS);
  });
}

document.addEventListener("DOMContentLoaded", boot);
