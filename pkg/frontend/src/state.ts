// Dashboard state as a pure reduction over the received message stream.
// No local inference happens here: every field is a restatement of data the
// gateway sent, which is what makes transcript replay byte-reproducible.

import {
  CONTROLS,
  Control,
  GatewayMessage,
  RankingEntry,
  SCHEMA_VERSION,
  SnapshotControl,
} from "./protocol.js";

export interface EventItem {
  control: Control;
  kind: string;
  tOn: number;
  tOff: number;
  peak: number;
}

export interface WizardPrompt {
  control: Control;
  step: number;
  level: number;
  hold: number;
  totalSteps: number;
}

export interface ControlState {
  status: string;
  winner: string | null;
  eventsSeen: number;
  rounds: number;
  entries: RankingEntry[];
  rankingUpdates: number;
  live: number;
  liveChannel: string | null;
  converged: boolean;
  notIdentified: boolean;
}

export interface UiState {
  connection: "idle" | "connected" | "error";
  errorReason: string | null;
  vehicle: string | null;
  controls: Record<Control, ControlState>;
  events: EventItem[];
  wizard: WizardPrompt | null;
  lastT: number;
  messagesSeen: number;
}

const EVENT_FEED_LIMIT = 50;

function emptyControl(): ControlState {
  return {
    status: "collecting",
    winner: null,
    eventsSeen: 0,
    rounds: 0,
    entries: [],
    rankingUpdates: 0,
    live: 0,
    liveChannel: null,
    converged: false,
    notIdentified: false,
  };
}

export function initialState(): UiState {
  return {
    connection: "idle",
    errorReason: null,
    vehicle: null,
    controls: {
      accelerator: emptyControl(),
      brake: emptyControl(),
      steering: emptyControl(),
    },
    events: [],
    wizard: null,
    lastT: 0,
    messagesSeen: 0,
  };
}

function asControl(value: unknown): Control | null {
  return CONTROLS.includes(value as Control) ? (value as Control) : null;
}

function withControl(
  state: UiState,
  control: Control,
  patch: Partial<ControlState>,
): UiState {
  return {
    ...state,
    controls: {
      ...state.controls,
      [control]: { ...state.controls[control], ...patch },
    },
  };
}

export function reduce(state: UiState, msg: GatewayMessage): UiState {
  if (state.connection === "error") return state; // blocking error screen
  const base: UiState = {
    ...state,
    lastT: Math.max(state.lastT, msg.t ?? 0),
    messagesSeen: state.messagesSeen + 1,
  };
  const body = msg.body ?? {};
  switch (msg.type) {
    case "hello": {
      if (msg.schema_version !== SCHEMA_VERSION) {
        return {
          ...base,
          connection: "error",
          errorReason: `schema_version mismatch: got ${msg.schema_version}`,
        };
      }
      return { ...base, connection: "connected" };
    }
    case "snapshot": {
      let next: UiState = { ...base, vehicle: (body.vehicle as string | null) ?? null };
      const controls = (body.controls ?? {}) as Record<string, SnapshotControl>;
      for (const name of CONTROLS) {
        const snap = controls[name];
        if (!snap) continue;
        next = withControl(next, name, {
          status: snap.status,
          winner: snap.winner,
          eventsSeen: snap.events_seen,
          rounds: snap.rounds,
          entries: snap.latest_entries ?? [],
          converged: snap.status === "converged",
          notIdentified: snap.status === "not_identified",
        });
      }
      return next;
    }
    case "ranking_update": {
      const control = asControl(body.control);
      if (!control) return base;
      const view = base.controls[control];
      return withControl(base, control, {
        entries: (body.entries as RankingEntry[]) ?? [],
        rounds: (body.round as number) ?? view.rounds,
        eventsSeen: (body.events_seen as number) ?? view.eventsSeen,
        rankingUpdates: view.rankingUpdates + 1,
      });
    }
    case "event_detected": {
      const control = asControl(body.control);
      if (!control) return base;
      const item: EventItem = {
        control,
        kind: (body.kind as string) ?? "",
        tOn: (body.t_on as number) ?? 0,
        tOff: (body.t_off as number) ?? 0,
        peak: (body.peak as number) ?? 0,
      };
      const next = withControl(base, control, {
        eventsSeen: base.controls[control].eventsSeen + 1,
      });
      return { ...next, events: [item, ...next.events].slice(0, EVENT_FEED_LIMIT) };
    }
    case "decoded_value": {
      const control = asControl(body.control);
      if (!control) return base;
      return withControl(base, control, {
        live: (body.value as number) ?? 0,
        liveChannel: (body.channel as string) ?? null,
      });
    }
    case "convergence": {
      const control = asControl(body.control);
      if (!control) return base;
      return withControl(base, control, {
        status: "converged",
        converged: true,
        winner: (body.winner as string) ?? null,
      });
    }
    case "not_identified": {
      const control = asControl(body.control);
      if (!control) return base;
      return withControl(base, control, {
        status: "not_identified",
        notIdentified: true,
        winner: null,
      });
    }
    case "calibration_prompt": {
      const control = asControl(body.control);
      if (!control) return base;
      return {
        ...base,
        wizard: {
          control,
          step: (body.step as number) ?? 0,
          level: (body.level as number) ?? 0,
          hold: (body.hold as number) ?? 0,
          totalSteps: (body.total_steps as number) ?? 0,
        },
      };
    }
    case "error": {
      return {
        ...base,
        connection: "error",
        errorReason: (body.reason as string) ?? "gateway error",
      };
    }
    default:
      return base; // unknown server types are ignored, never fatal
  }
}

export function replayTranscript(
  messages: GatewayMessage[],
  upToT?: number,
): UiState {
  let state = initialState();
  for (const msg of messages) {
    if (upToT !== undefined && msg.t > upToT) continue;
    state = reduce(state, msg);
  }
  return state;
}

// --- view-model helpers used by the DOM renderer ---------------------------

export function pedalBarFraction(state: UiState, control: Control): number {
  return Math.max(0, Math.min(1, state.controls[control].live));
}

export function steeringWheelAngleDeg(state: UiState, maxDeg = 90): number {
  const v = Math.max(-1, Math.min(1, state.controls.steering.live));
  return v * maxDeg;
}

export function bannerText(state: UiState, control: Control): string | null {
  const view = state.controls[control];
  if (view.notIdentified) return "N/A";
  if (view.converged && view.winner) return view.winner;
  return null;
}
