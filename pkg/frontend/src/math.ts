/** Small pose algebra used by the example scripts (plain number[][] 4x4). */

import type { Pose, Vec } from "./api.js";

export function identity4(): Pose {
  return [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1],
  ];
}

/** Pure translation transform, the usual SE3(dx, dy, dz) shorthand. */
export function se3(dx: number, dy: number, dz: number): Pose {
  const T = identity4();
  T[0][3] = dx;
  T[1][3] = dy;
  T[2][3] = dz;
  return T;
}

export function matmul4(a: Pose, b: Pose): Pose {
  const out = identity4();
  for (let i = 0; i < 4; i++) {
    for (let j = 0; j < 4; j++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  }
  return out;
}

export function se3Inverse(T: Pose): Pose {
  const out = identity4();
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) out[i][j] = T[j][i];
  }
  for (let i = 0; i < 3; i++) {
    out[i][3] = -(out[i][0] * T[0][3] + out[i][1] * T[1][3] + out[i][2] * T[2][3]);
  }
  return out;
}

export function copyPose(T: Pose): Pose {
  return T.map((row) => [...row]);
}

/** Intrinsic z-y-x Euler angles (roll, pitch, yaw) of the rotation block. */
export function rpyZyx(T: Pose): Vec {
  const sy = Math.min(1, Math.max(-1, -T[2][0]));
  const pitch = Math.asin(sy);
  if (Math.abs(sy) > 1 - 1e-12) {
    return [Math.atan2(-T[1][2], T[1][1]), pitch, 0];
  }
  return [Math.atan2(T[2][1], T[2][2]), pitch, Math.atan2(T[1][0], T[0][0])];
}

/** Mixed-unit arrival measure: sum |translation| + sum |rpy in rad|. */
export function spatialError(Te: Pose, Tep: Pose): number {
  const rel = matmul4(se3Inverse(Te), Tep);
  const rpy = rpyZyx(rel);
  return (
    Math.abs(rel[0][3]) + Math.abs(rel[1][3]) + Math.abs(rel[2][3]) +
    Math.abs(rpy[0]) + Math.abs(rpy[1]) + Math.abs(rpy[2])
  );
}

export function eye(n: number): number[][] {
  return Array.from({ length: n }, (_, i) =>
    Array.from({ length: n }, (_, j) => (i === j ? 1 : 0)),
  );
}

export function zeros(n: number): number[] {
  return new Array(n).fill(0);
}
