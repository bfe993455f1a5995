/**
 * Scripting surface mirroring the native client library: Desk, Panda,
 * Gripper, the controller classes, kinematics helpers and constants.
 * Everything is async because each call crosses into the bridge process.
 */

import { Bridge } from "./rpc.js";

export type Vec = number[];
export type Pose = number[][];

export interface RobotStateJson {
  seq: number;
  time: number;
  q: Vec;
  dq: Vec;
  tau_J: Vec;
  O_T_EE: Pose;
  error_flags: number;
  control_mode: string;
}

export interface LogColumns {
  time: number[];
  seq: number[];
  q: number[][];
  dq: number[][];
  tau_J: number[][];
  O_T_EE: Pose[];
  error_flags: number[];
}

export interface Constants {
  JOINT_POSITION_START: Vec;
  dq_max: Vec;
}

export async function loadConstants(bridge: Bridge): Promise<Constants> {
  const raw = await bridge.call<{ joint_position_start: Vec; dq_max: Vec }>("constants");
  return { JOINT_POSITION_START: raw.joint_position_start, dq_max: raw.dq_max };
}

export function fk(bridge: Bridge, q: Vec): Promise<Pose> {
  return bridge.call<Pose>("fk", { q });
}

export function ik(bridge: Bridge, pose: Pose, q7?: number, qInit?: Vec): Promise<Vec> {
  return bridge.call<Vec>("ik", { pose, q7: q7 ?? null, q_init: qInit ?? null });
}

/** End-effector-frame geometric Jacobian (6 x 7). */
export function jacobe(bridge: Bridge, q: Vec): Promise<number[][]> {
  return bridge.call<number[][]>("jacobian", { q });
}

/** Manipulability gradient (the "manipulability Jacobian"), length 7. */
export function jacobm(bridge: Bridge, q: Vec): Promise<Vec> {
  return bridge.call<Vec>("manipulability_jacobian", { q });
}

export function pServo(
  bridge: Bridge,
  Te: Pose,
  Tep: Pose,
  gain = 1.0,
  threshold = 0.1,
): Promise<{ v: Vec; arrived: boolean }> {
  return bridge.call<{ v: Vec; arrived: boolean }>("p_servo", { Te, Tep, gain, threshold });
}

export interface QpSolution {
  x: Vec;
  status: string;
  objective: number;
}

export function solveQp(
  bridge: Bridge,
  Q: number[][],
  c: Vec,
  A_eq: number[][],
  b_eq: Vec,
  lb: Vec,
  ub: Vec,
): Promise<QpSolution> {
  return bridge.call<QpSolution>("solve_qp", { Q, c, A_eq, b_eq, lb, ub });
}

export class Desk {
  private constructor(private readonly bridge: Bridge) {}

  static async login(
    bridge: Bridge,
    hostname: string,
    username: string,
    password: string,
    port = 7101,
  ): Promise<Desk> {
    await bridge.call("desk_login", { hostname, username, password, port });
    return new Desk(bridge);
  }

  unlock(): Promise<unknown> {
    return this.bridge.call("desk_unlock");
  }

  lock(): Promise<unknown> {
    return this.bridge.call("desk_lock");
  }

  activate_fci(): Promise<unknown> {
    return this.bridge.call("desk_activate_fci");
  }

  deactivate_fci(): Promise<unknown> {
    return this.bridge.call("desk_deactivate_fci");
  }

  status(): Promise<{ brakes_locked: boolean; fci_active: boolean }> {
    return this.bridge.call("desk_status");
  }
}

interface ControllerLike {
  readonly kind: string;
  attach(bridge: Bridge): void;
}

abstract class ControllerBase implements ControllerLike {
  abstract readonly kind: string;
  protected bridge: Bridge | null = null;

  attach(bridge: Bridge): void {
    this.bridge = bridge;
  }

  protected need(): Bridge {
    if (!this.bridge) throw new Error("controller is not running");
    return this.bridge;
  }

  /** Seconds of controller time since start. */
  get_time(): Promise<number> {
    return this.need().call<number>("controller_time");
  }
}

export class CartesianImpedance extends ControllerBase {
  readonly kind = "cartesian_impedance";

  /** Asynchronous pose setpoint: position [m] and quaternion (x, y, z, w). */
  set_control(position: Vec, orientation: Vec): Promise<unknown> {
    return this.need().call("set_control", { position, orientation });
  }
}

export class IntegratedVelocity extends ControllerBase {
  readonly kind = "integrated_velocity";

  /** Asynchronous joint velocity command, rad/s. */
  set_control(dq: Vec): Promise<unknown> {
    return this.need().call("set_control", { dq });
  }
}

export class JointImpedance extends ControllerBase {
  readonly kind = "joint_impedance";

  set_control(q: Vec): Promise<unknown> {
    return this.need().call("set_control", { q });
  }
}

export const controllers = { CartesianImpedance, IntegratedVelocity, JointImpedance };

export class PandaContext {
  constructor(
    private readonly bridge: Bridge,
    private readonly handle: number,
  ) {}

  /** Paces the loop at its frequency; false once max_runtime elapsed. */
  ok(): Promise<boolean> {
    return this.bridge.call<boolean>("context_ok", { ctx: this.handle });
  }
}

export class Panda {
  private constructor(private readonly bridge: Bridge) {}

  static async connect(
    bridge: Bridge,
    hostname: string,
    opts: { tcpPort?: number; udpPort?: number } = {},
  ): Promise<Panda> {
    await bridge.call("connect", {
      hostname,
      tcp_port: opts.tcpPort ?? 7100,
      udp_port: opts.udpPort ?? 7200,
    });
    return new Panda(bridge);
  }

  /** Latest joint positions, rad. */
  async q(): Promise<Vec> {
    return this.bridge.call<Vec>("get_q");
  }

  get_state(): Promise<RobotStateJson> {
    return this.bridge.call<RobotStateJson>("get_state");
  }

  get_pose(): Promise<Pose> {
    return this.bridge.call<Pose>("get_pose");
  }

  get_position(): Promise<Vec> {
    return this.bridge.call<Vec>("get_position");
  }

  get_orientation(): Promise<Vec> {
    return this.bridge.call<Vec>("get_orientation");
  }

  move_to_start(speedFactor = 0.2): Promise<{ success: boolean }> {
    return this.bridge.call("move_to_start", { speed_factor: speedFactor });
  }

  move_to_joint_position(waypoints: Vec | Vec[], speedFactor = 0.2): Promise<{ success: boolean }> {
    return this.bridge.call("move_to_joint_position", {
      waypoints,
      speed_factor: speedFactor,
    });
  }

  move_to_pose(poses: Pose | Pose[], speedFactor = 0.2): Promise<{ success: boolean }> {
    return this.bridge.call("move_to_pose", { poses, speed_factor: speedFactor });
  }

  enable_logging(bufferSize: number): Promise<unknown> {
    return this.bridge.call("enable_logging", { buffer_size: bufferSize });
  }

  disable_logging(): Promise<unknown> {
    return this.bridge.call("disable_logging");
  }

  get_log(): Promise<LogColumns> {
    return this.bridge.call<LogColumns>("get_log");
  }

  /** Native CSV export of the log buffer (stable documented column order). */
  export_log_csv(path: string): Promise<unknown> {
    return this.bridge.call("export_log_csv", { path });
  }

  async start_controller(ctrl: ControllerLike): Promise<void> {
    await this.bridge.call("start_controller", { kind: ctrl.kind });
    ctrl.attach(this.bridge);
  }

  stop_controller(): Promise<unknown> {
    return this.bridge.call("stop_controller");
  }

  async create_context(opts: { frequency: number; max_runtime?: number }): Promise<PandaContext> {
    const handle = await this.bridge.call<number>("create_context", {
      frequency: opts.frequency,
      max_runtime: opts.max_runtime ?? null,
    });
    return new PandaContext(this.bridge, handle);
  }

  close(): Promise<unknown> {
    return this.bridge.call("close");
  }
}

export class EmptyLogError extends Error {
  constructor() {
    super("log buffer holds no states");
    this.name = "EmptyLogError";
  }
}

/**
 * Flatten a log snapshot into named columns aligned with the telemetry CSV
 * schema (time, q0..q6, dq0..dq6, tau0..tau6, ee_x/y/z, m00..m33
 * column-major). Throws EmptyLogError on an empty buffer.
 */
export function logToTable(log: LogColumns): Map<string, number[]> {
  const n = log.time.length;
  if (n === 0) throw new EmptyLogError();
  const table = new Map<string, number[]>();
  table.set("time", [...log.time]);
  for (let j = 0; j < 7; j++) {
    table.set(`q${j}`, log.q.map((row) => row[j]));
    table.set(`dq${j}`, log.dq.map((row) => row[j]));
    table.set(`tau${j}`, log.tau_J.map((row) => row[j]));
  }
  table.set("ee_x", log.O_T_EE.map((T) => T[0][3]));
  table.set("ee_y", log.O_T_EE.map((T) => T[1][3]));
  table.set("ee_z", log.O_T_EE.map((T) => T[2][3]));
  for (let c = 0; c < 4; c++) {
    for (let r = 0; r < 4; r++) {
      table.set(`m${r}${c}`, log.O_T_EE.map((T) => T[r][c]));
    }
  }
  return table;
}

export class Gripper {
  private constructor(private readonly bridge: Bridge) {}

  static async connect(bridge: Bridge, hostname: string, port = 7100): Promise<Gripper> {
    await bridge.call("gripper_connect", { hostname, port });
    return new Gripper(bridge);
  }

  /** Close until contact; true iff the grasped width fits the window. */
  grasp(
    width: number,
    speed: number,
    force: number,
    epsilonInner = 0.005,
    epsilonOuter = 0.005,
  ): Promise<boolean> {
    return this.bridge.call<boolean>("gripper_grasp", {
      width,
      speed,
      force,
      epsilon_inner: epsilonInner,
      epsilon_outer: epsilonOuter,
    });
  }

  move(width: number, speed: number): Promise<boolean> {
    return this.bridge.call<boolean>("gripper_move", { width, speed });
  }

  state(): Promise<{ width: number; is_grasped: boolean }> {
    return this.bridge.call("gripper_state");
  }
}
