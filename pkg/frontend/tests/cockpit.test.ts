/** Scripted pilot acceptance: drive 20 steps against the real service, then
 * feed the captured log through the dataset builder unchanged.
 */

import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CockpitController } from "../src/cockpit.js";
import { closestApproach, parseEpisodeLog } from "../src/logparse.js";
import type { ActionWord } from "../src/types.js";
import { type RunningService, runCli, startService } from "./helpers.js";

let service: RunningService;
let workDir: string;

beforeAll(async () => {
  workDir = await mkdtemp(join(tmpdir(), "console-pilot-"));
  service = await startService();
});

afterAll(async () => {
  await service.stop();
  await rm(workDir, { recursive: true, force: true });
});

const PILOT_KEYS = [
  "KeyW", "KeyW", "KeyW", "KeyW", "KeyW", "KeyW",
  "KeyA", "KeyD", "KeyQ", "KeyE",
  "Space", "Space",
  "KeyW", "KeyW", "KeyW", "KeyS",
  "Space", "KeyW", "KeyW", "Space",
];

const EXPECTED_ACTIONS: ActionWord[] = [
  "forward", "forward", "forward", "forward", "forward", "forward",
  "left", "right", "up", "down",
  "coast", "coast",
  "forward", "forward", "forward", "backward",
  "coast", "forward", "forward", "coast",
];

describe("scripted pilot session", () => {
  it("pilots 20 steps whose log is accepted unchanged by the dataset builder", async () => {
    const cockpit = new CockpitController();
    const telemetryRanges: number[] = [];
    cockpit.onChange(() => undefined);

    await cockpit.connectAndCreate(service.baseUrl, 57);
    expect(cockpit.state.status).toBe("live");
    expect(cockpit.state.sessionId).not.toBeNull();
    const initialRange = cockpit.state.observation!.range;
    expect(initialRange).toBeGreaterThan(0);
    expect(initialRange).toBeLessThanOrEqual(3000);

    for (const code of PILOT_KEYS) {
      const issued = cockpit.handleKey(code);
      expect(issued).not.toBeNull();
      await issued;
      telemetryRanges.push(cockpit.state.observation!.range);
    }

    // One keypress, one step: the history mirrors the scripted sequence.
    expect(cockpit.state.history.map((h) => h.action)).toEqual(EXPECTED_ACTIONS);
    expect(cockpit.state.droppedInputs).toBe(0);

    // Unbound keys never issue steps.
    expect(cockpit.handleKey("KeyX")).toBeNull();

    // Inputs during an in-flight step are dropped, not queued.
    const first = cockpit.issueStep("forward");
    const second = cockpit.issueStep("forward");
    expect(second).toBeNull();
    await first;
    expect(cockpit.state.droppedInputs).toBe(1);
    const extraSteps = 1;

    const logText = await cockpit.fetchLog();
    const logPath = join(workDir, "piloted.jsonl");
    await writeFile(logPath, logText);
    cockpit.disconnect();

    // Displayed ranges equal the service-reported ranges exactly: the log is
    // the service's own record, and the HUD never recomputes physics.
    const log = parseEpisodeLog(logText);
    expect(log.steps.length).toBe(PILOT_KEYS.length + extraSteps);
    for (let i = 0; i < PILOT_KEYS.length; i += 1) {
      expect(log.steps[i].range).toBe(telemetryRanges[i]);
      expect(log.steps[i].agent.verbal).toBe(EXPECTED_ACTIONS[i]);
    }

    // The dataset builder accepts the human log unchanged.
    const datasetPath = join(workDir, "train.jsonl");
    const { stdout } = await runCli([
      "dataset", "--logs", workDir, "--top-k", "1", "--window", "3",
      "--out", datasetPath,
    ]);
    expect(stdout).toContain("wrote");
    const dataset = (await readFile(datasetPath, "utf8")).trim().split("\n");
    expect(dataset.length).toBe(PILOT_KEYS.length + extraSteps);
    const example = JSON.parse(dataset[0]) as {
      messages: { role: string; tool_calls?: unknown }[];
    };
    expect(example.messages[0].role).toBe("system");
    expect(example.messages.at(-1)?.role).toBe("assistant");
  });

  it("shows an error state for an unreachable server without a zombie session", async () => {
    const cockpit = new CockpitController();
    await cockpit.connectAndCreate("http://127.0.0.1:9", 1);
    expect(cockpit.state.status).toBe("error");
    expect(cockpit.state.sessionId).toBeNull();
    expect(cockpit.state.errorMessage).toBeTruthy();
  });

  it("replays a navball log with the service's own closest approach", async () => {
    const scenarioPath = join(workDir, "scenario.json");
    await runCli(["generate", "--count", "1", "--seed", "99", "--out", scenarioPath]);
    const navballPath = join(workDir, "navball.jsonl");
    const { stdout } = await runCli([
      "run", "--scenario", scenarioPath, "--agent", "navball",
      "--record", navballPath,
    ]);
    const match = stdout.match(/closest approach ([\d.]+) m/);
    expect(match).not.toBeNull();
    const log = parseEpisodeLog(await readFile(navballPath, "utf8"));
    const closest = closestApproach(log);
    expect(closest.distance.toFixed(2)).toBe(Number(match![1]).toFixed(2));
  });

  it("resumes telemetry from the current step after reconnect", async () => {
    const cockpit = new CockpitController();
    await cockpit.connectAndCreate(service.baseUrl, 31);
    expect(cockpit.state.status).toBe("live");
    await cockpit.issueStep("forward");
    const rangeBefore = cockpit.state.observation!.range;
    cockpit.reconnectTelemetry();
    await cockpit.issueStep("forward");
    expect(cockpit.state.observation!.range).not.toBe(rangeBefore);
    expect(cockpit.state.observation!.mission_time).toBe(2);
    cockpit.disconnect();
  });
});
