/**
 * Browser entry point: reads the user and workspace from the URL, wires
 * the app controller to the canvas and panels, and re-renders on every
 * state notification.
 *
 * URL parameters: ?user=<name>&workspace=<id>. A missing user is prompted
 * for; a missing workspace lets the server mint a fresh one (its id then
 * appears in the top bar and can be shared).
 */

import { BoardApp } from "./app.js";
import { BoardCanvas } from "./canvas.js";
import { Panels } from "./panels.js";

function main(): void {
  const params = new URLSearchParams(window.location.search);
  let user = params.get("user");
  while (user === null || !user.trim()) {
    user = window.prompt("Your name?") ?? "";
  }
  user = user.trim();
  const workspace = params.get("workspace");

  const proto = window.location.protocol === "https:" ? "wss:" : "ws:";
  const app = new BoardApp({
    user,
    workspace,
    wsUrl: `${proto}//${window.location.host}/ws`,
    apiBase: "",
  });

  const topBar = document.getElementById("top-bar")!;
  const sidePanel = document.getElementById("side-panel")!;
  const canvasRoot = document.getElementById("canvas")!;

  const canvas = new BoardCanvas(canvasRoot, app);
  const panels = new Panels(topBar, sidePanel, app, (dir) =>
    dir > 0 ? canvas.zoomIn() : canvas.zoomOut(),
  );

  let frame = 0;
  app.subscribe(() => {
    // collapse bursts of notifications into one paint
    if (frame !== 0) return;
    frame = window.requestAnimationFrame(() => {
      frame = 0;
      canvas.render();
      panels.render();
      const ws = app.workspaceId;
      if (ws !== null && params.get("workspace") !== ws) {
        params.set("workspace", ws);
        window.history.replaceState(null, "", `?${params.toString()}`);
      }
    });
  });

  canvas.render();
  panels.render();
  app.start();
}

main();
