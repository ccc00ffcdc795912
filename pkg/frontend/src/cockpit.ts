/** Pilot-mode state machine: one keypress, one step, never two in flight.
 *
 * Pure controller (no DOM): the page layer subscribes to onChange and
 * renders ConsoleState. All displayed telemetry comes from the service.
 */

import { SessionApi, ServiceError } from "./api.js";
import { actionForKey } from "./keymap.js";
import { subscribeSse, type SseSubscription } from "./sse.js";
import type { ActionWord, Observation } from "./types.js";

export type ConnectionStatus = "idle" | "connecting" | "live" | "terminated" | "error";

export interface HistoryEntry {
  action: ActionWord;
  range: number;
  missionTime: number;
}

export interface ConsoleState {
  mode: "pilot" | "replay";
  status: ConnectionStatus;
  sessionId: string | null;
  observation: Observation | null;
  history: HistoryEntry[];
  stepInFlight: boolean;
  droppedInputs: number;
  terminationReason: string | null;
  errorMessage: string | null;
}

export class CockpitController {
  private api: SessionApi | null = null;
  private telemetry: SseSubscription | null = null;
  private listeners: ((state: ConsoleState) => void)[] = [];

  state: ConsoleState = {
    mode: "pilot",
    status: "idle",
    sessionId: null,
    observation: null,
    history: [],
    stepInFlight: false,
    droppedInputs: 0,
    terminationReason: null,
    errorMessage: null,
  };

  onChange(listener: (state: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private emit(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Create a session and subscribe its telemetry; errors leave no session. */
  async connectAndCreate(serverUrl: string, seed: number): Promise<void> {
    this.disconnect();
    this.emit({ status: "connecting", errorMessage: null, history: [], droppedInputs: 0 });
    const api = new SessionApi(serverUrl);
    try {
      const created = await api.createSession(seed);
      this.api = api;
      this.emit({
        status: "live",
        sessionId: created.session_id,
        observation: created.observation,
        terminationReason: null,
      });
      this.telemetry = subscribeSse(
        api.telemetryUrl(created.session_id),
        (event) => {
          if (event.event === "observation") {
            const payload = JSON.parse(event.data) as {
              observation: Observation;
              terminated: boolean;
              termination_reason: string;
            };
            this.emit({ observation: payload.observation });
            if (payload.terminated) {
              this.emit({ status: "terminated", terminationReason: payload.termination_reason });
            }
          } else if (event.event === "termination") {
            const payload = JSON.parse(event.data) as { termination_reason: string };
            this.emit({ status: "terminated", terminationReason: payload.termination_reason });
          }
        },
        () => {
          if (this.state.status === "live") {
            this.emit({ errorMessage: "telemetry stream lost (reconnect to resume)" });
          }
        },
      );
    } catch (err) {
      this.api = null;
      const message = err instanceof ServiceError ? err.message : String(err);
      this.emit({ status: "error", sessionId: null, errorMessage: message });
    }
  }

  /** Re-subscribe telemetry mid-episode (resumes from the current step). */
  reconnectTelemetry(): void {
    if (!this.api || !this.state.sessionId) return;
    this.telemetry?.close();
    this.telemetry = subscribeSse(
      this.api.telemetryUrl(this.state.sessionId),
      (event) => {
        if (event.event === "observation") {
          const payload = JSON.parse(event.data) as { observation: Observation };
          this.emit({ observation: payload.observation });
        }
      },
      () => undefined,
    );
  }

  /** Handle one key press; returns the promise of the issued step, if any. */
  handleKey(code: string): Promise<void> | null {
    const action = actionForKey(code);
    if (action === null) return null;
    return this.issueStep(action);
  }

  /** Issue one step; inputs while a step is in flight are dropped. */
  issueStep(action: ActionWord): Promise<void> | null {
    if (!this.api || !this.state.sessionId || this.state.status !== "live") return null;
    if (this.state.stepInFlight) {
      this.emit({ droppedInputs: this.state.droppedInputs + 1 });
      return null;
    }
    this.emit({ stepInFlight: true });
    const api = this.api;
    const sessionId = this.state.sessionId;
    return (async () => {
      try {
        const result = await api.step(sessionId, action);
        this.emit({
          observation: result.observation,
          history: [
            ...this.state.history,
            {
              action,
              range: result.observation.range,
              missionTime: result.observation.mission_time,
            },
          ],
          ...(result.terminated
            ? { status: "terminated" as const, terminationReason: result.termination_reason }
            : {}),
        });
      } catch (err) {
        if (err instanceof ServiceError && err.status === 409) {
          this.emit({ droppedInputs: this.state.droppedInputs + 1 });
        } else {
          const message = err instanceof ServiceError ? err.message : String(err);
          this.emit({ errorMessage: message });
        }
      } finally {
        this.emit({ stepInFlight: false });
      }
    })();
  }

  /** Download the session's episode log (JSON-lines) from the service. */
  async fetchLog(): Promise<string> {
    if (!this.api || !this.state.sessionId) throw new Error("no live session");
    return this.api.fetchLog(this.state.sessionId);
  }

  disconnect(): void {
    this.telemetry?.close();
    this.telemetry = null;
    if (this.api && this.state.sessionId) {
      void this.api.deleteSession(this.state.sessionId);
    }
    this.api = null;
    this.emit({ status: "idle", sessionId: null, stepInFlight: false });
  }
}
