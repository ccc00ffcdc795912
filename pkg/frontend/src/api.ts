/** Thin typed client for the session service; no simulation logic here. */

import type { ActionWord, CreateSessionResponse, StepResult } from "./types.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number | null,
  ) {
    super(message);
  }
}

async function errorFromResponse(response: Response): Promise<ServiceError> {
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: { message?: string } };
    if (body.error?.message) message = body.error.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ServiceError(message, response.status);
}

export class SessionApi {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(seed: number): Promise<CreateSessionResponse> {
    let response: Response;
    try {
      response = await fetch(this.url("/sessions"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ seed }),
      });
    } catch (err) {
      throw new ServiceError(`cannot reach service: ${String(err)}`, null);
    }
    if (!response.ok) throw await errorFromResponse(response);
    return (await response.json()) as CreateSessionResponse;
  }

  async step(sessionId: string, action: ActionWord): Promise<StepResult> {
    let response: Response;
    try {
      response = await fetch(this.url(`/sessions/${sessionId}/step`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ action }),
      });
    } catch (err) {
      throw new ServiceError(`step failed: ${String(err)}`, null);
    }
    if (!response.ok) throw await errorFromResponse(response);
    return (await response.json()) as StepResult;
  }

  async fetchLog(sessionId: string): Promise<string> {
    const response = await fetch(this.url(`/sessions/${sessionId}/log`));
    if (!response.ok) throw await errorFromResponse(response);
    return response.text();
  }

  async deleteSession(sessionId: string): Promise<void> {
    try {
      await fetch(this.url(`/sessions/${sessionId}`), { method: "DELETE" });
    } catch {
      // best-effort teardown; the service reaps idle sessions anyway
    }
  }

  telemetryUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/telemetry`);
  }
}
