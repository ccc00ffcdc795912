import { mkdtemp, readFile, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { LogParseError, closestApproach, parseEpisodeLog, rangeSamples } from "../src/logparse.js";
import { runCli } from "./helpers.js";

let workDir: string;
let navballLogText: string;
let reportedClosest: { distance: number; time: number };

beforeAll(async () => {
  workDir = await mkdtemp(join(tmpdir(), "console-logparse-"));
  const scenarioPath = join(workDir, "scenario.json");
  await runCli(["generate", "--count", "1", "--seed", "57", "--out", scenarioPath]);
  const logPath = join(workDir, "navball.jsonl");
  const { stdout } = await runCli([
    "run", "--scenario", scenarioPath, "--agent", "navball", "--record", logPath,
  ]);
  const match = stdout.match(/closest approach ([\d.]+) m at t=(\d+) s/);
  if (!match) throw new Error(`cannot parse CLI score line: ${stdout}`);
  reportedClosest = { distance: Number(match[1]), time: Number(match[2]) };
  navballLogText = await readFile(logPath, "utf8");
});

afterAll(async () => {
  await rm(workDir, { recursive: true, force: true });
});

describe("parseEpisodeLog", () => {
  it("parses a real navball log", () => {
    const log = parseEpisodeLog(navballLogText);
    expect(log.header.schema).toBe("episode-log-v1");
    expect(log.steps.length).toBe(240);
    expect(log.header.initial).not.toBeNull();
    expect(log.steps[0].agent.verbal.length).toBeGreaterThan(0);
  });

  it("collects per-line diagnostics for malformed records", () => {
    const lines = navballLogText.trim().split("\n");
    lines[3] = "{broken json";
    lines[5] = JSON.stringify({ t: 5 }); // missing range and vessels
    let caught: LogParseError | null = null;
    try {
      parseEpisodeLog(lines.join("\n"));
    } catch (err) {
      caught = err as LogParseError;
    }
    expect(caught).not.toBeNull();
    expect(caught!.diagnostics.some((d) => d.startsWith("line 4:"))).toBe(true);
    expect(caught!.diagnostics.some((d) => d.startsWith("line 6:"))).toBe(true);
  });

  it("rejects an empty file", () => {
    expect(() => parseEpisodeLog("")).toThrow(LogParseError);
  });

  it("rejects a missing header", () => {
    const lines = navballLogText.trim().split("\n");
    expect(() => parseEpisodeLog(lines.slice(1).join("\n"))).toThrow(LogParseError);
  });
});

describe("closestApproach", () => {
  it("matches the closest approach reported by the simulator to 2 decimals", () => {
    const log = parseEpisodeLog(navballLogText);
    const closest = closestApproach(log);
    expect(closest.distance.toFixed(2)).toBe(reportedClosest.distance.toFixed(2));
    expect(Math.round(closest.time)).toBe(reportedClosest.time);
  });

  it("includes the initial sample", () => {
    const log = parseEpisodeLog(navballLogText);
    const samples = rangeSamples(log);
    expect(samples.length).toBe(241);
    expect(samples[0][0]).toBe(0);
  });
});
