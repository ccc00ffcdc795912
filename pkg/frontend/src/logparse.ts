/** Episode-log JSON-lines parsing and closest-approach scoring.
 *
 * The console never recomputes physics: every number shown comes from the
 * log or the service.
 */

import type { EpisodeLogFile, LogHeader, LogStepRecord } from "./types.js";

export class LogParseError extends Error {
  constructor(
    message: string,
    public readonly diagnostics: string[],
  ) {
    super(message);
  }
}

function checkVessel(value: unknown, line: number, name: string, diagnostics: string[]): void {
  const vessel = value as { r?: unknown; v?: unknown } | null;
  if (
    !vessel ||
    !Array.isArray(vessel.r) ||
    vessel.r.length !== 3 ||
    !Array.isArray(vessel.v) ||
    vessel.v.length !== 3
  ) {
    diagnostics.push(`line ${line}: ${name} state must carry 3-vectors r and v`);
  }
}

/** Parse a serialized episode log; collects per-line diagnostics before failing. */
export function parseEpisodeLog(text: string): EpisodeLogFile {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new LogParseError("empty log file", ["no content"]);
  }
  const diagnostics: string[] = [];

  let header: LogHeader | null = null;
  try {
    const parsed = JSON.parse(lines[0]) as LogHeader;
    if (parsed.schema !== "episode-log-v1") {
      diagnostics.push(`line 1: expected header schema episode-log-v1, got ${String(parsed.schema)}`);
    } else {
      header = parsed;
    }
  } catch (err) {
    diagnostics.push(`line 1: invalid JSON header: ${String(err)}`);
  }

  const steps: LogStepRecord[] = [];
  for (let index = 1; index < lines.length; index += 1) {
    const lineNumber = index + 1;
    try {
      const record = JSON.parse(lines[index]) as LogStepRecord;
      if (typeof record.t !== "number" || typeof record.range !== "number") {
        diagnostics.push(`line ${lineNumber}: step record missing t/range`);
        continue;
      }
      checkVessel(record.pursuer, lineNumber, "pursuer", diagnostics);
      checkVessel(record.evader, lineNumber, "evader", diagnostics);
      steps.push(record);
    } catch (err) {
      diagnostics.push(`line ${lineNumber}: invalid JSON: ${String(err)}`);
    }
  }

  if (diagnostics.length > 0 || header === null) {
    throw new LogParseError(
      `log has ${diagnostics.length || 1} malformed line(s)`,
      diagnostics,
    );
  }
  return { header, steps };
}

/** (time, range) samples: the initial state, then every step. */
export function rangeSamples(log: EpisodeLogFile): [number, number][] {
  const samples: [number, number][] = [];
  if (log.header.initial) {
    samples.push([log.header.initial.t, log.header.initial.range]);
  }
  for (const step of log.steps) {
    samples.push([step.t, step.range]);
  }
  return samples;
}

/** Minimum recorded range and its time; ties resolve to the earliest sample. */
export function closestApproach(log: EpisodeLogFile): { distance: number; time: number } {
  const samples = rangeSamples(log);
  if (samples.length === 0) {
    throw new LogParseError("log has no range samples", []);
  }
  let [bestTime, bestRange] = samples[0];
  for (const [t, r] of samples.slice(1)) {
    if (r < bestRange) {
      bestRange = r;
      bestTime = t;
    }
  }
  return { distance: bestRange, time: bestTime };
}
