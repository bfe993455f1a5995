/** Cartesian impedance control with an asynchronous sinusoidal setpoint. */

import { Bridge, Desk, Panda, controllers } from "../src/index.js";
import { Target, isMain, targetFromEnv } from "./config.js";

export interface SineResult {
  iterations: number;
  amplitude: number;
  rmsError: number;
}

export async function run(target: Target, runtime = Math.PI * 4.0): Promise<SineResult> {
  const bridge = await Bridge.spawn();
  try {
    const desk = await Desk.login(bridge, target.hostname, target.username,
                                  target.password, target.deskPort);
    await desk.unlock();
    await desk.activate_fci();
    const panda = await Panda.connect(bridge, target.hostname,
                                      { tcpPort: target.tcpPort, udpPort: target.udpPort });

    await panda.move_to_start();
    const ctrl = new controllers.CartesianImpedance();
    const x0 = await panda.get_position();
    const q0 = await panda.get_orientation();
    await panda.start_controller(ctrl);

    const yMeasured: number[] = [];
    const yCommanded: number[] = [];
    let iterations = 0;
    const ctx = await panda.create_context({ frequency: 1e3, max_runtime: runtime });
    while (await ctx.ok()) {
      const x_d = [...x0];
      x_d[1] += 0.1 * Math.sin(await ctrl.get_time());
      await ctrl.set_control(x_d, q0);
      iterations += 1;
      yMeasured.push((await panda.get_position())[1]);
      yCommanded.push(x_d[1]);
    }
    await panda.stop_controller();

    const lo = Math.min(...yMeasured);
    const hi = Math.max(...yMeasured);
    let sq = 0;
    for (let i = 0; i < yMeasured.length; i++) {
      sq += (yMeasured[i] - yCommanded[i]) ** 2;
    }
    return {
      iterations,
      amplitude: (hi - lo) / 2,
      rmsError: Math.sqrt(sq / yMeasured.length),
    };
  } finally {
    await bridge.close();
  }
}

if (isMain(import.meta.url)) {
  run(targetFromEnv()).then((r) => {
    console.log(`${r.iterations} iterations, y amplitude ${r.amplitude.toFixed(4)} m, `
                + `RMS tracking error ${(r.rmsError * 1e3).toFixed(2)} mm`);
  }).catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
