/** Wire and log schemas shared with the session service. */

export type Vec3 = [number, number, number];

export interface Observation {
  mission_time: number;
  pursuer_position: Vec3;
  pursuer_velocity: Vec3;
  evader_position: Vec3;
  evader_velocity: Vec3;
  relative_position: Vec3;
  relative_velocity: Vec3;
  range: number;
  range_rate: number;
}

export interface StepResult {
  observation: Observation;
  terminated: boolean;
  termination_reason: string;
}

export interface CreateSessionResponse {
  session_id: string;
  observation: Observation;
  constraint_report: { name: string; passed: boolean }[];
}

export type ActionWord =
  | "forward"
  | "backward"
  | "right"
  | "left"
  | "up"
  | "down"
  | "coast";

export const ACTION_WORDS: readonly ActionWord[] = [
  "forward",
  "backward",
  "right",
  "left",
  "up",
  "down",
  "coast",
];

/** One log line's vessel state: inertial position r and velocity v. */
export interface VesselState {
  r: Vec3;
  v: Vec3;
}

export interface LogStepRecord {
  t: number;
  pursuer: VesselState;
  evader: VesselState;
  range: number;
  range_rate: number;
  action: { r: number; s: number; w: number };
  agent: { verbal: string; rationale: string; latency_ms: number; failed: boolean };
}

export interface LogHeader {
  schema: string;
  log_id: string;
  termination_reason: string;
  agent_meta: Record<string, unknown>;
  scenario: unknown;
  initial: {
    t: number;
    pursuer: VesselState;
    evader: VesselState;
    range: number;
    range_rate: number;
  } | null;
}

export interface EpisodeLogFile {
  header: LogHeader;
  steps: LogStepRecord[];
}
