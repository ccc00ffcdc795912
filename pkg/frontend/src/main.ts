/** DOM wiring for the cockpit page: pilot HUD, key handling, replay viewer. */

import { CockpitController, type ConsoleState } from "./cockpit.js";
import { fmt, fmtClock, fmtVec, navballIndicator } from "./hud.js";
import { KEY_LEGEND } from "./keymap.js";
import { LogParseError, parseEpisodeLog } from "./logparse.js";
import { ReplayModel, buildReplay } from "./replay.js";
import { fitCamera, project } from "./render3d.js";
import type { Vec3 } from "./types.js";

const controller = new CockpitController();
const replayModel = new ReplayModel();

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

// --- pilot panel --------------------------------------------------------------

function renderPilot(state: ConsoleState): void {
  element<HTMLSpanElement>("status").textContent =
    state.status + (state.terminationReason ? ` (${state.terminationReason})` : "");
  element<HTMLDivElement>("error-banner").textContent = state.errorMessage ?? "";
  element<HTMLDivElement>("error-banner").style.display = state.errorMessage ? "block" : "none";

  const obs = state.observation;
  if (obs) {
    element<HTMLSpanElement>("clock").textContent = fmtClock(obs.mission_time);
    element<HTMLSpanElement>("range").textContent = `${fmt(obs.range)} m`;
    element<HTMLSpanElement>("range-rate").textContent = `${fmt(obs.range_rate)} m/s`;
    element<HTMLSpanElement>("rel-pos").textContent = fmtVec(obs.relative_position);
    element<HTMLSpanElement>("rel-vel").textContent = fmtVec(obs.relative_velocity);
    const indicator = navballIndicator(obs);
    if (indicator) {
      element<HTMLSpanElement>("nav-az").textContent = `${fmt(indicator.azimuthDeg, 1)} deg`;
      element<HTMLSpanElement>("nav-el").textContent = `${fmt(indicator.elevationDeg, 1)} deg`;
      drawNavball(indicator.azimuthDeg, indicator.elevationDeg);
    }
  }

  const history = element<HTMLUListElement>("history");
  history.innerHTML = "";
  for (const entry of state.history.slice(-12).reverse()) {
    const item = document.createElement("li");
    item.textContent = `t=${fmt(entry.missionTime, 0)}s  ${entry.action}  range ${fmt(entry.range)} m`;
    history.appendChild(item);
  }
  element<HTMLSpanElement>("dropped").textContent = String(state.droppedInputs);
}

function drawNavball(azimuthDeg: number, elevationDeg: number): void {
  const canvas = element<HTMLCanvasElement>("navball");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  const radius = Math.min(width, height) / 2 - 4;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#4af";
  ctx.beginPath();
  ctx.arc(width / 2, height / 2, radius, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(width / 2 - radius, height / 2);
  ctx.lineTo(width / 2 + radius, height / 2);
  ctx.moveTo(width / 2, height / 2 - radius);
  ctx.lineTo(width / 2, height / 2 + radius);
  ctx.strokeStyle = "#234";
  ctx.stroke();
  const x = width / 2 + (radius * Math.sin((azimuthDeg * Math.PI) / 180) *
    Math.cos((elevationDeg * Math.PI) / 180));
  const y = height / 2 - radius * Math.sin((elevationDeg * Math.PI) / 180);
  ctx.fillStyle = "#fc4";
  ctx.beginPath();
  ctx.arc(x, y, 6, 0, 2 * Math.PI);
  ctx.fill();
}

// --- replay panel ---------------------------------------------------------------

function renderReplay(): void {
  const canvas = element<HTMLCanvasElement>("trajectory");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (replayModel.replays.length === 0) {
    ctx.fillStyle = "#889";
    ctx.fillText("load an episode log to replay", 20, height / 2);
    element<HTMLDivElement>("closest").textContent = "";
    return;
  }

  const allPoints: Vec3[] = [];
  for (const replay of replayModel.replays) {
    for (const point of replay.points) {
      allPoints.push(point.pursuer, point.evader);
    }
  }
  const camera = fitCamera(allPoints, width, height);
  const palette = [
    { pursuer: "#4af", evader: "#f66" },
    { pursuer: "#4e9", evader: "#e4c" },
  ];

  const legend: string[] = [];
  replayModel.replays.forEach((replay, index) => {
    const colors = palette[index % palette.length];
    for (const [series, color] of [
      [replay.points.map((p) => p.pursuer), colors.pursuer],
      [replay.points.map((p) => p.evader), colors.evader],
    ] as const) {
      const visibleCount = replayModel.visiblePoints(replay).length;
      ctx.strokeStyle = color;
      ctx.beginPath();
      series.slice(0, Math.max(visibleCount, 1)).forEach((point, i) => {
        const [x, y] = project(point, camera, width, height);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    }
    const current = replayModel.currentPoint(replay);
    for (const [point, color] of [
      [current.pursuer, colors.pursuer],
      [current.evader, colors.evader],
    ] as const) {
      const [x, y] = project(point, camera, width, height);
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(x, y, 4, 0, 2 * Math.PI);
      ctx.fill();
    }
    const marker = replayModel.closestMarker(replay);
    if (marker) {
      const [x, y] = project(marker.pursuer, camera, width, height);
      ctx.strokeStyle = "#fc4";
      ctx.beginPath();
      ctx.arc(x, y, 8, 0, 2 * Math.PI);
      ctx.stroke();
    }
    legend.push(
      `${replay.label}: closest approach ${fmt(replay.closest.distance)} m ` +
      `at t=${fmt(replay.closest.time, 0)} s`,
    );
  });

  element<HTMLDivElement>("closest").textContent = legend.join("  |  ");
  element<HTMLSpanElement>("scrub-time").textContent = `${fmt(replayModel.currentTime, 0)} s`;
}

async function loadReplayFile(file: File): Promise<void> {
  const diagnosticsBox = element<HTMLDivElement>("replay-diagnostics");
  diagnosticsBox.textContent = "";
  try {
    const log = parseEpisodeLog(await file.text());
    replayModel.add(buildReplay(log, file.name));
    const scrubber = element<HTMLInputElement>("scrubber");
    scrubber.max = String(replayModel.maxTime);
    scrubber.value = String(replayModel.maxTime);
    replayModel.scrubTo(replayModel.maxTime);
    renderReplay();
  } catch (err) {
    if (err instanceof LogParseError) {
      diagnosticsBox.textContent = [err.message, ...err.diagnostics].join("\n");
    } else {
      diagnosticsBox.textContent = String(err);
    }
  }
}

// --- wiring --------------------------------------------------------------------

export function wirePage(): void {
  const legend = element<HTMLDivElement>("key-legend");
  legend.textContent = KEY_LEGEND.map((k) => `${k.key}=${k.action}`).join("  ");

  controller.onChange(renderPilot);

  element<HTMLButtonElement>("connect").addEventListener("click", () => {
    const serverUrl = element<HTMLInputElement>("server-url").value;
    const seed = Number.parseInt(element<HTMLInputElement>("seed").value, 10);
    void controller.connectAndCreate(serverUrl, Number.isNaN(seed) ? 0 : seed);
  });
  element<HTMLButtonElement>("disconnect").addEventListener("click", () => {
    controller.disconnect();
  });
  element<HTMLButtonElement>("save-log").addEventListener("click", () => {
    void controller.fetchLog().then((text) => {
      const blob = new Blob([text], { type: "application/x-ndjson" });
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `${controller.state.sessionId ?? "episode"}.jsonl`;
      link.click();
      URL.revokeObjectURL(link.href);
    });
  });

  window.addEventListener("keydown", (event) => {
    if ((event.target as HTMLElement | null)?.tagName === "INPUT") return;
    const issued = controller.handleKey(event.code);
    if (issued !== null) event.preventDefault();
  });

  element<HTMLInputElement>("log-file").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    for (const file of input.files ?? []) {
      void loadReplayFile(file);
    }
    input.value = "";
  });
  element<HTMLInputElement>("scrubber").addEventListener("input", (event) => {
    replayModel.scrubTo(Number.parseFloat((event.target as HTMLInputElement).value));
    renderReplay();
  });
  element<HTMLButtonElement>("clear-replays").addEventListener("click", () => {
    replayModel.clear();
    renderReplay();
  });

  renderReplay();
}

if (typeof document !== "undefined" && document.getElementById("connect")) {
  wirePage();
}
