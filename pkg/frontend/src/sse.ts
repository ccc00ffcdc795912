/** Minimal server-sent-events reader over fetch streams.
 *
 * Works in both the browser and node (no EventSource dependency), which
 * keeps the cockpit testable headlessly against a real service.
 */

export interface SseEvent {
  event: string;
  data: string;
}

/** Parse complete SSE frames out of a buffer; returns events and the remainder. */
export function parseSseChunk(buffer: string): { events: SseEvent[]; rest: string } {
  const events: SseEvent[] = [];
  const frames = buffer.split("\n\n");
  const rest = frames.pop() ?? "";
  for (const frame of frames) {
    let event = "message";
    const dataLines: string[] = [];
    for (const line of frame.split("\n")) {
      if (line.startsWith("event: ")) event = line.slice("event: ".length);
      else if (line.startsWith("data: ")) dataLines.push(line.slice("data: ".length));
    }
    if (dataLines.length > 0) events.push({ event, data: dataLines.join("\n") });
  }
  return { events, rest };
}

export interface SseSubscription {
  close(): void;
  done: Promise<void>;
}

export function subscribeSse(
  url: string,
  onEvent: (event: SseEvent) => void,
  onError: (err: unknown) => void,
): SseSubscription {
  const controller = new AbortController();
  const done = (async () => {
    try {
      const response = await fetch(url, { signal: controller.signal });
      if (!response.ok || response.body === null) {
        onError(new Error(`telemetry stream failed: HTTP ${response.status}`));
        return;
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done: finished, value } = await reader.read();
        if (finished) break;
        buffer += decoder.decode(value, { stream: true });
        const { events, rest } = parseSseChunk(buffer);
        buffer = rest;
        for (const event of events) onEvent(event);
      }
    } catch (err) {
      if (!controller.signal.aborted) onError(err);
    }
  })();
  return {
    close: () => controller.abort(),
    done,
  };
}
