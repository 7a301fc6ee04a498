// Websocket client. The only frames ever sent are hello, select_control,
// and calibration_ack; everything received is handed to the reducer.

import {
  ClientMessageType,
  Control,
  GatewayMessage,
  SCHEMA_VERSION,
  makeMessage,
} from "./protocol.js";

const ALLOWED_OUTBOUND: ClientMessageType[] = [
  "hello",
  "select_control",
  "calibration_ack",
];

export class GatewayClient {
  private socket: WebSocket | null = null;
  readonly outbox: GatewayMessage[] = []; // audit trail for tests

  constructor(
    private url: string,
    private onMessage: (msg: GatewayMessage) => void,
    private onClose: () => void = () => {},
  ) {}

  connect(): void {
    this.socket = new WebSocket(this.url);
    this.socket.onmessage = (ev: MessageEvent) => {
      this.onMessage(JSON.parse(String(ev.data)) as GatewayMessage);
    };
    this.socket.onopen = () => {
      this.send(makeMessage("hello", 0, { schema_version: SCHEMA_VERSION }));
    };
    this.socket.onclose = () => this.onClose();
  }

  send(msg: GatewayMessage): void {
    if (!ALLOWED_OUTBOUND.includes(msg.type as ClientMessageType)) {
      throw new Error(`client may not send ${msg.type}`);
    }
    this.outbox.push(msg);
    if (this.socket && this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(JSON.stringify(msg));
    }
  }

  selectControl(control: Control, t: number, channel?: string): void {
    const body: Record<string, unknown> = { control };
    if (channel) body.channel = channel;
    this.send(makeMessage("select_control", t, body));
  }

  close(): void {
    this.socket?.close();
  }
}
