/** HUD formatting and the navball-style target-direction indicator. */

import type { Observation, Vec3 } from "./types.js";

export function fmt(value: number, digits = 2): string {
  return value.toFixed(digits);
}

export function fmtVec(v: Vec3, digits = 2): string {
  return `${fmt(v[0], digits)}, ${fmt(v[1], digits)}, ${fmt(v[2], digits)}`;
}

export function fmtClock(missionTime: number): string {
  const total = Math.floor(missionTime);
  const minutes = Math.floor(total / 60);
  const seconds = total % 60;
  return `${String(minutes).padStart(2, "0")}:${String(seconds).padStart(2, "0")}`;
}

export interface NavballIndicator {
  /** Unit direction to the target in the pursuer's RSW frame. */
  direction: Vec3;
  /** Horizontal angle on the ball face: along-track right, radial up. */
  azimuthDeg: number;
  /** Elevation toward cross-track. */
  elevationDeg: number;
  closingSpeed: number;
}

/** Target-direction cue from telemetry; null when the range is zero. */
export function navballIndicator(observation: Observation): NavballIndicator | null {
  if (observation.range <= 0) return null;
  const [r, s, w] = observation.relative_position;
  const direction: Vec3 = [
    r / observation.range,
    s / observation.range,
    w / observation.range,
  ];
  return {
    direction,
    azimuthDeg: (Math.atan2(direction[0], direction[1]) * 180) / Math.PI,
    elevationDeg: (Math.asin(Math.max(-1, Math.min(1, direction[2]))) * 180) / Math.PI,
    closingSpeed: -observation.range_rate,
  };
}
