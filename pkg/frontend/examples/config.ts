/** Shared target configuration for the example scripts.
 *
 * Edit the hostname (or set PANDA_HOSTNAME) to point at your simulator; the
 * port overrides exist so test harnesses can aim at ephemeral ports.
 */

export interface Target {
  hostname: string;
  tcpPort: number;
  deskPort: number;
  udpPort: number;
  username: string;
  password: string;
}

export function targetFromEnv(): Target {
  return {
    hostname: process.env.PANDA_HOSTNAME ?? "127.0.0.1",
    tcpPort: Number(process.env.PANDA_TCP_PORT ?? 7100),
    deskPort: Number(process.env.PANDA_DESK_PORT ?? 7101),
    udpPort: Number(process.env.PANDA_UDP_PORT ?? 7200),
    username: process.env.PANDA_USERNAME ?? "admin",
    password: process.env.PANDA_PASSWORD ?? "admin",
  };
}

export function isMain(moduleUrl: string): boolean {
  if (!process.argv[1]) return false;
  return moduleUrl.endsWith(process.argv[1].split("/").pop() ?? "");
}
