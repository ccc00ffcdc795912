/** Projection math for the trajectory canvas: orbit-scale 3D to 2D pixels.
 *
 * The view recenters on the evader's first sample so kilometer-scale
 * relative motion is visible despite the 750 km orbit radius, then applies
 * yaw/pitch rotation and an orthographic fit.
 */

import type { Vec3 } from "./types.js";

export interface Camera {
  yaw: number;
  pitch: number;
  center: Vec3;
  /** meters per pixel */
  scale: number;
}

export function rotate(point: Vec3, yaw: number, pitch: number): Vec3 {
  const [x, y, z] = point;
  const cy = Math.cos(yaw);
  const sy = Math.sin(yaw);
  const x1 = cy * x + sy * y;
  const y1 = -sy * x + cy * y;
  const cp = Math.cos(pitch);
  const sp = Math.sin(pitch);
  const y2 = cp * y1 + sp * z;
  const z2 = -sp * y1 + cp * z;
  return [x1, y2, z2];
}

export function project(
  point: Vec3,
  camera: Camera,
  width: number,
  height: number,
): [number, number] {
  const local: Vec3 = [
    point[0] - camera.center[0],
    point[1] - camera.center[1],
    point[2] - camera.center[2],
  ];
  const [x, , z] = rotate(local, camera.yaw, camera.pitch);
  return [width / 2 + x / camera.scale, height / 2 - z / camera.scale];
}

/** Fit a camera so every point lands inside the viewport with a margin. */
export function fitCamera(points: Vec3[], width: number, height: number): Camera {
  if (points.length === 0) {
    return { yaw: 0.6, pitch: 0.4, center: [0, 0, 0], scale: 1 };
  }
  const center: Vec3 = [0, 0, 0];
  for (const p of points) {
    center[0] += p[0] / points.length;
    center[1] += p[1] / points.length;
    center[2] += p[2] / points.length;
  }
  const camera: Camera = { yaw: 0.6, pitch: 0.4, center, scale: 1 };
  let extent = 1;
  for (const p of points) {
    const local: Vec3 = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
    const [x, , z] = rotate(local, camera.yaw, camera.pitch);
    extent = Math.max(extent, Math.abs(x), Math.abs(z));
  }
  camera.scale = (2.2 * extent) / Math.min(width, height);
  return camera;
}
