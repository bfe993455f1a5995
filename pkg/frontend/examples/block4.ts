/** Telemetry logging around a Cartesian motion between two displaced poses.
 *
 * The buffer holds 2000 steps, i.e. the final two seconds at 1 kHz. Pass a
 * csvPath to also export the native CSV for plotting (see plot_fig1.ts).
 */

import { Bridge, Desk, LogColumns, Panda, fk, loadConstants } from "../src/index.js";
import { copyPose } from "../src/math.js";
import { Target, isMain, targetFromEnv } from "./config.js";

export async function run(target: Target, csvPath?: string): Promise<LogColumns> {
  const bridge = await Bridge.spawn();
  try {
    const desk = await Desk.login(bridge, target.hostname, target.username,
                                  target.password, target.deskPort);
    await desk.unlock();
    await desk.activate_fci();
    const panda = await Panda.connect(bridge, target.hostname,
                                      { tcpPort: target.tcpPort, udpPort: target.udpPort });
    const constants = await loadConstants(bridge);

    const T_0 = await fk(bridge, constants.JOINT_POSITION_START);
    T_0[1][3] = 0.25;
    const T_1 = copyPose(T_0);
    T_1[1][3] = -0.25;

    await panda.move_to_pose(T_0);
    await panda.enable_logging(2e3);
    await panda.move_to_pose(T_1);
    await panda.disable_logging();
    const log = await panda.get_log();

    if (csvPath) {
      await panda.export_log_csv(csvPath);
    }
    return log;
  } finally {
    await bridge.close();
  }
}

if (isMain(import.meta.url)) {
  const csv = process.argv[2];
  run(targetFromEnv(), csv).then((log) => {
    const span = log.time[log.time.length - 1] - log.time[0];
    console.log(`logged ${log.time.length} states spanning ${span.toFixed(3)} s`
                + (csv ? `, csv written to ${csv}` : ""));
  }).catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
