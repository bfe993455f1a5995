/** Resolved-rate motion control with reactive manipulability maximization.
 *
 * Each 20 Hz cycle solves a QP for joint velocities realizing the commanded
 * end-effector twist (softened by a slack variable) while pushing along the
 * manipulability gradient; the solution feeds the IntegratedVelocity
 * controller. Joint-limit rows are absent on purpose: the controller's
 * integrator clamps and the impedance walls repel.
 */

import {
  Bridge, Desk, Panda, controllers, fk, jacobe, jacobm, loadConstants,
  pServo, solveQp,
} from "../src/index.js";
import { eye, matmul4, se3, spatialError, zeros } from "../src/math.js";
import { Target, isMain, targetFromEnv } from "./config.js";

export interface ServoResult {
  arrived: boolean;
  iterations: number;
  finalError: number;
}

export async function run(target: Target, maxIterations = 600): Promise<ServoResult> {
  const bridge = await Bridge.spawn();
  try {
    const desk = await Desk.login(bridge, target.hostname, target.username,
                                  target.password, target.deskPort);
    await desk.unlock();
    await desk.activate_fci();
    const panda = await Panda.connect(bridge, target.hostname,
                                      { tcpPort: target.tcpPort, udpPort: target.udpPort });
    const constants = await loadConstants(bridge);

    const ctrl = new controllers.IntegratedVelocity();
    await panda.move_to_start();
    await panda.start_controller(ctrl);

    // Desired end-effector pose: the start pose shifted in its own frame.
    const Tep = matmul4(await fk(bridge, await panda.q()), se3(0.3, 0.2, 0.3));

    const n = 7;
    let arrived = false;
    let iterations = 0;
    let e = Number.POSITIVE_INFINITY;

    const ctx = await panda.create_context({ frequency: 20 });
    while ((await ctx.ok()) && !arrived && iterations < maxIterations) {
      iterations += 1;
      const q = await panda.q();
      const Te = await fk(bridge, q);

      // Mixed-unit spatial error driving the slack weight.
      e = Math.max(spatialError(Te, Tep), 1e-6);

      const servo = await pServo(bridge, Te, Tep, 1.0);
      arrived = servo.arrived;
      if (arrived) break;

      // Gain term (lambda) for control minimisation.
      const Y = 0.01;

      // Quadratic cost: joint velocities weighted by Y, slack by 1/e.
      const Q = eye(n + 6);
      for (let i = 0; i < n; i++) Q[i][i] *= Y;
      for (let i = n; i < n + 6; i++) Q[i][i] = 1.0 / e;

      // Equality constraints: J dq + slack = commanded twist.
      const J = await jacobe(bridge, q);
      const Aeq = J.map((row, r) =>
        [...row, ...eye(6)[r]],
      );
      const beq = servo.v;

      // Linear cost: along the negative manipulability gradient.
      const jm = await jacobm(bridge, q);
      const c = [...jm.map((v) => -v), ...zeros(6)];

      // Bounds on joint velocity and slack.
      const lb = [...constants.dq_max.map((v) => -v), ...new Array(6).fill(-10)];
      const ub = [...constants.dq_max, ...new Array(6).fill(10)];

      const sol = await solveQp(bridge, Q, c, Aeq, beq, lb, ub);
      const qd = sol.x;

      await ctrl.set_control(qd.slice(0, n));
    }
    await panda.stop_controller();
    return { arrived, iterations, finalError: e };
  } finally {
    await bridge.close();
  }
}

if (isMain(import.meta.url)) {
  run(targetFromEnv()).then((r) => {
    console.log(`arrived=${r.arrived} after ${r.iterations} cycles, `
                + `final spatial error ${r.finalError.toFixed(4)}`);
  }).catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
