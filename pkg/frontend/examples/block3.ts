/** Joint-space motion: lower the end effector 10 cm via inverse kinematics. */

import { Bridge, Desk, Panda, ik } from "../src/index.js";
import { Target, isMain, targetFromEnv } from "./config.js";

export async function run(target: Target): Promise<{ before: number; after: number }> {
  const bridge = await Bridge.spawn();
  try {
    const desk = await Desk.login(bridge, target.hostname, target.username,
                                  target.password, target.deskPort);
    await desk.unlock();
    await desk.activate_fci();
    const panda = await Panda.connect(bridge, target.hostname,
                                      { tcpPort: target.tcpPort, udpPort: target.udpPort });

    await panda.move_to_start();
    const pose = await panda.get_pose();
    const before = pose[2][3];
    pose[2][3] -= 0.1;
    const q = await ik(bridge, pose);
    await panda.move_to_joint_position(q);

    const after = (await panda.get_pose())[2][3];
    return { before, after };
  } finally {
    await bridge.close();
  }
}

if (isMain(import.meta.url)) {
  run(targetFromEnv()).then((r) => {
    console.log(`EE height: ${r.before.toFixed(4)} m -> ${r.after.toFixed(4)} m`);
  }).catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
