/** Connect the robot handle and the (non-realtime) gripper handle. */

import { Bridge, Desk, Gripper, Panda } from "../src/index.js";
import { Target, isMain, targetFromEnv } from "./config.js";

export async function run(target: Target): Promise<{ seq: number; gripperWidth: number }> {
  const bridge = await Bridge.spawn();
  try {
    const desk = await Desk.login(bridge, target.hostname, target.username,
                                  target.password, target.deskPort);
    await desk.unlock();
    await desk.activate_fci();

    const panda = await Panda.connect(bridge, target.hostname,
                                      { tcpPort: target.tcpPort, udpPort: target.udpPort });
    const gripper = await Gripper.connect(bridge, target.hostname, target.tcpPort);

    const state = await panda.get_state();
    const gstate = await gripper.state();
    return { seq: state.seq, gripperWidth: gstate.width };
  } finally {
    await bridge.close();
  }
}

if (isMain(import.meta.url)) {
  run(targetFromEnv()).then((r) => {
    console.log(`connected: state seq=${r.seq}, gripper width=${r.gripperWidth} m`);
  }).catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
