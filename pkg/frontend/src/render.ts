// DOM rendering: a full re-render of the dashboard from UiState. Gauges are
// driven by the view-model helpers so tests can assert on them without a DOM.

import { CONTROLS, Control } from "./protocol.js";
import {
  UiState,
  bannerText,
  pedalBarFraction,
  steeringWheelAngleDeg,
} from "./state.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function fmt(x: number, digits = 2): string {
  return x.toFixed(digits);
}

export function renderError(state: UiState): void {
  const overlay = el("error-overlay");
  if (state.connection === "error") {
    overlay.style.display = "flex";
    el("error-reason").textContent = state.errorReason ?? "connection error";
  } else {
    overlay.style.display = "none";
  }
}

function renderRankingTable(control: Control, state: UiState): void {
  const tbody = el(`ranking-${control}`);
  const view = state.controls[control];
  tbody.innerHTML = "";
  if (view.entries.length === 0) {
    const row = document.createElement("tr");
    row.innerHTML = "<td>N/A</td><td>N/A</td><td>N/A</td>";
    tbody.appendChild(row);
    return;
  }
  for (const entry of view.entries) {
    const row = document.createElement("tr");
    const id = document.createElement("td");
    id.textContent = String(entry.id);
    const channel = document.createElement("td");
    channel.textContent = entry.channel;
    const corr = document.createElement("td");
    corr.textContent = entry.correlation.toFixed(7);
    row.append(id, channel, corr);
    tbody.appendChild(row);
  }
}

function renderControlPanel(control: Control, state: UiState): void {
  const view = state.controls[control];
  el(`status-${control}`).textContent = view.status;
  el(`events-${control}`).textContent = String(view.eventsSeen);
  el(`rounds-${control}`).textContent = String(view.rounds);
  const banner = el(`banner-${control}`);
  const text = bannerText(state, control);
  banner.textContent = text ?? "";
  banner.className = "banner" +
    (view.notIdentified ? " banner-na" : view.converged ? " banner-won" : "");
  banner.style.display = text ? "inline-block" : "none";
  renderRankingTable(control, state);
}

export function render(state: UiState): void {
  renderError(state);
  el("vehicle").textContent = state.vehicle ?? "—";
  el("connection").textContent = state.connection;
  el("clock").textContent = `t=${fmt(state.lastT, 1)}s`;

  for (const control of CONTROLS) renderControlPanel(control, state);

  // pedals: vertical fill bars
  for (const control of ["accelerator", "brake"] as Control[]) {
    const bar = el(`pedal-${control}`);
    const frac = pedalBarFraction(state, control);
    bar.style.height = `${Math.round(frac * 100)}%`;
    el(`pedal-${control}-value`).textContent = fmt(frac);
  }

  // steering: rotate the wheel proportionally to the normalized value
  const wheel = el("steering-wheel");
  wheel.style.transform = `rotate(${fmt(steeringWheelAngleDeg(state), 1)}deg)`;
  el("steering-value").textContent = fmt(state.controls.steering.live);

  // event feed
  const feed = el("event-feed");
  feed.innerHTML = "";
  for (const ev of state.events) {
    const li = document.createElement("li");
    li.textContent =
      `${ev.kind} [${ev.control}] ${fmt(ev.tOn, 1)}–${fmt(ev.tOff, 1)}s ` +
      `peak ${fmt(ev.peak)}`;
    feed.appendChild(li);
  }

  // calibration wizard
  const panel = el("wizard-panel");
  if (state.wizard) {
    panel.style.display = "block";
    el("wizard-title").textContent =
      `Calibrate ${state.wizard.control}: step ${state.wizard.step + 1}` +
      ` of ${state.wizard.totalSteps}`;
    el("wizard-level").textContent = fmt(state.wizard.level);
    el("wizard-hold").textContent = `${fmt(state.wizard.hold, 0)}s`;
  } else {
    panel.style.display = "none";
  }
}
