/** Fixed cockpit keymap: W/S/A/D/Q/E/space -> the seven verbal actions. */

import type { ActionWord } from "./types.js";

const KEYMAP: Record<string, ActionWord> = {
  KeyW: "forward",
  KeyS: "backward",
  KeyA: "left",
  KeyD: "right",
  KeyQ: "up",
  KeyE: "down",
  Space: "coast",
};

/** Map a KeyboardEvent.code to an action word, or null for unbound keys. */
export function actionForKey(code: string): ActionWord | null {
  return KEYMAP[code] ?? null;
}

export const KEY_LEGEND: readonly { key: string; action: ActionWord }[] = [
  { key: "W", action: "forward" },
  { key: "S", action: "backward" },
  { key: "A", action: "left" },
  { key: "D", action: "right" },
  { key: "Q", action: "up" },
  { key: "E", action: "down" },
  { key: "space", action: "coast" },
];
