// Operator side of the calibration wizard: shows each prompt with a hold
// countdown and emits one acknowledgement per confirmed step. Aborting sends
// a final calibration_ack carrying abort=true and leaves the state resumable.

import { GatewayMessage, makeMessage } from "./protocol.js";
import { WizardPrompt } from "./state.js";

export type WizardSend = (msg: GatewayMessage) => void;

export class WizardClient {
  prompt: WizardPrompt | null = null;
  acked: number[] = [];
  aborted = false;
  countdown = 0;

  constructor(private send: WizardSend) {}

  onPrompt(prompt: WizardPrompt): void {
    if (this.aborted) return;
    this.prompt = prompt;
    this.countdown = prompt.hold;
  }

  tick(seconds: number): void {
    this.countdown = Math.max(0, this.countdown - seconds);
  }

  confirm(t: number): void {
    if (!this.prompt || this.aborted) return;
    const step = this.prompt.step;
    this.acked.push(step);
    this.send(
      makeMessage("calibration_ack", t, {
        control: this.prompt.control,
        step,
      }),
    );
  }

  cancel(t: number): void {
    if (!this.prompt || this.aborted) return;
    this.aborted = true;
    this.send(
      makeMessage("calibration_ack", t, {
        control: this.prompt.control,
        step: this.prompt.step,
        abort: true,
      }),
    );
  }

  resume(): void {
    // the last prompt stays on screen so the operator can pick up again
    this.aborted = false;
  }

  get done(): boolean {
    return (
      this.prompt !== null &&
      !this.aborted &&
      this.acked.length >= this.prompt.totalSteps
    );
  }
}
