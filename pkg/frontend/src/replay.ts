/** Replay model: scrubbed trajectory views over one or two parsed logs. */

import { closestApproach, rangeSamples } from "./logparse.js";
import type { EpisodeLogFile, Vec3 } from "./types.js";

export interface TrajectoryPoint {
  t: number;
  pursuer: Vec3;
  evader: Vec3;
  range: number;
}

export interface LoadedReplay {
  label: string;
  points: TrajectoryPoint[];
  closest: { distance: number; time: number };
}

export function buildReplay(log: EpisodeLogFile, label: string): LoadedReplay {
  const points: TrajectoryPoint[] = [];
  if (log.header.initial) {
    points.push({
      t: log.header.initial.t,
      pursuer: log.header.initial.pursuer.r,
      evader: log.header.initial.evader.r,
      range: log.header.initial.range,
    });
  }
  for (const step of log.steps) {
    points.push({ t: step.t, pursuer: step.pursuer.r, evader: step.evader.r, range: step.range });
  }
  if (points.length === 0) {
    throw new Error("log contains no trajectory points");
  }
  return { label, points, closest: closestApproach(log) };
}

export class ReplayModel {
  replays: LoadedReplay[] = [];
  currentTime = 0;

  /** Load or overlay a replay; at most two are kept for comparison. */
  add(replay: LoadedReplay): void {
    this.replays.push(replay);
    if (this.replays.length > 2) this.replays.shift();
    this.currentTime = 0;
  }

  clear(): void {
    this.replays = [];
    this.currentTime = 0;
  }

  get maxTime(): number {
    return Math.max(0, ...this.replays.map((r) => r.points[r.points.length - 1].t));
  }

  scrubTo(t: number): void {
    this.currentTime = Math.min(Math.max(t, 0), this.maxTime);
  }

  /** Points visible at the current scrub time (trajectory up to t). */
  visiblePoints(replay: LoadedReplay): TrajectoryPoint[] {
    return replay.points.filter((p) => p.t <= this.currentTime + 1e-9);
  }

  /** The sample at (or latest before) the scrub time. */
  currentPoint(replay: LoadedReplay): TrajectoryPoint {
    const visible = this.visiblePoints(replay);
    return visible.length > 0 ? visible[visible.length - 1] : replay.points[0];
  }

  /** The closest-approach marker position for one replay. */
  closestMarker(replay: LoadedReplay): TrajectoryPoint | null {
    for (const point of replay.points) {
      if (point.t === replay.closest.time) return point;
    }
    return null;
  }
}

/** Range-vs-time series for the scrubber's sparkline. */
export function rangeSeries(log: EpisodeLogFile): [number, number][] {
  return rangeSamples(log);
}
