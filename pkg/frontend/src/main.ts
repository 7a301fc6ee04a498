// Bootstrap: live gateway mode by default, transcript replay mode with
// ?transcript=<url>. Replay paces messages by their source timestamps.

import { GatewayClient } from "./gateway.js";
import { GatewayMessage, parseTranscript } from "./protocol.js";
import { UiState, initialState, reduce } from "./state.js";
import { WizardClient } from "./wizard.js";
import { render } from "./render.js";

let state: UiState = initialState();
let client: GatewayClient | null = null;
let wizard: WizardClient | null = null;

function apply(msg: GatewayMessage): void {
  state = reduce(state, msg);
  if (msg.type === "calibration_prompt" && wizard && state.wizard) {
    wizard.onPrompt(state.wizard);
  }
  render(state);
}

function startLive(): void {
  const url =
    new URLSearchParams(location.search).get("gateway") ??
    `ws://${location.hostname || "127.0.0.1"}:8765`;
  client = new GatewayClient(url, apply, () => {
    const banner = document.getElementById("connection");
    if (banner) banner.textContent = "disconnected";
  });
  wizard = new WizardClient((msg) => client!.send(msg));
  client.connect();
  wireControls();
}

async function startReplay(url: string): Promise<void> {
  const response = await fetch(url);
  const messages = parseTranscript(await response.text());
  wizard = new WizardClient(() => {});
  let i = 0;
  let t0: number | null = null;
  const speedup = Number(
    new URLSearchParams(location.search).get("speedup") ?? "10",
  );
  const started = performance.now();
  const step = () => {
    while (i < messages.length) {
      const msg = messages[i];
      if (t0 === null) t0 = msg.t;
      const due = ((msg.t - t0) / speedup) * 1000;
      if (performance.now() - started < due) break;
      apply(msg);
      i += 1;
    }
    if (i < messages.length) requestAnimationFrame(step);
  };
  requestAnimationFrame(step);
}

function wireControls(): void {
  for (const control of ["accelerator", "brake", "steering"] as const) {
    const btn = document.getElementById(`select-${control}`);
    btn?.addEventListener("click", () =>
      client?.selectControl(control, state.lastT),
    );
  }
  document.getElementById("wizard-confirm")?.addEventListener("click", () => {
    wizard?.confirm(state.lastT);
  });
  document.getElementById("wizard-cancel")?.addEventListener("click", () => {
    wizard?.cancel(state.lastT);
  });
  setInterval(() => {
    if (wizard && state.wizard) {
      wizard.tick(0.2);
      const node = document.getElementById("wizard-countdown");
      if (node) node.textContent = `${wizard.countdown.toFixed(1)}s`;
    }
  }, 200);
}

const transcript = new URLSearchParams(location.search).get("transcript");
render(state);
if (transcript) {
  void startReplay(transcript);
} else {
  startLive();
}
