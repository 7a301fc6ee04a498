// Gateway wire format (see ../protocol.md). One JSON object per text frame.

export const SCHEMA_VERSION = "1";

export type Control = "accelerator" | "brake" | "steering";
export const CONTROLS: Control[] = ["accelerator", "brake", "steering"];

export type ServerMessageType =
  | "hello"
  | "snapshot"
  | "ranking_update"
  | "event_detected"
  | "decoded_value"
  | "calibration_prompt"
  | "convergence"
  | "not_identified"
  | "error";

export type ClientMessageType = "hello" | "select_control" | "calibration_ack";

export interface GatewayMessage {
  schema_version: string;
  type: string;
  t: number;
  body: Record<string, unknown>;
}

export interface RankingEntry {
  id: number;
  channel: string;
  correlation: number;
}

export interface SnapshotControl {
  status: string;
  winner: string | null;
  events_seen: number;
  rounds: number;
  latest_entries: RankingEntry[];
  selected: string | null;
}

export function makeMessage(
  type: ClientMessageType,
  t: number,
  body: Record<string, unknown>,
): GatewayMessage {
  return { schema_version: SCHEMA_VERSION, type, t, body };
}

export function parseTranscript(text: string): GatewayMessage[] {
  const messages: GatewayMessage[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    messages.push(JSON.parse(trimmed) as GatewayMessage);
  }
  return messages;
}
