/** Unlock the brakes and activate the realtime interface via the desk. */

import { Bridge, Desk } from "../src/index.js";
import { Target, isMain, targetFromEnv } from "./config.js";

export async function run(target: Target): Promise<{ brakes_locked: boolean; fci_active: boolean }> {
  const bridge = await Bridge.spawn();
  try {
    const desk = await Desk.login(bridge, target.hostname, target.username,
                                  target.password, target.deskPort);
    await desk.unlock();
    await desk.activate_fci();

    return await desk.status();
  } finally {
    await bridge.close();
  }
}

if (isMain(import.meta.url)) {
  run(targetFromEnv()).then((status) => {
    console.log(`brakes_locked=${status.brakes_locked} fci_active=${status.fci_active}`);
  }).catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
