/** Helper that spawns a simulator process and reports its bound ports. */

import { ChildProcess, spawn } from "node:child_process";
import * as readline from "node:readline";

import { pythonEnv, pythonExecutable } from "./rpc.js";

export interface SimPorts {
  tcp_port: number;
  desk_port: number;
  udp_port: number;
}

export class SimServerProcess {
  private constructor(
    private readonly proc: ChildProcess,
    public readonly ports: SimPorts,
  ) {}

  static async spawn(
    opts: { mode?: "lockstep" | "wallclock"; objectWidth?: number } = {},
  ): Promise<SimServerProcess> {
    const args = [
      "-m", "pandasim.server",
      "--tcp-port", "0", "--desk-port", "0", "--udp-port", "0",
      "--mode", opts.mode ?? "lockstep",
    ];
    if (opts.objectWidth !== undefined) {
      args.push("--object-width", String(opts.objectWidth));
    }
    const proc = spawn(pythonExecutable(), args, {
      env: pythonEnv(),
      stdio: ["ignore", "pipe", "inherit"],
    });
    const ports = await new Promise<SimPorts>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("simserver never became ready")), 15000);
      const rl = readline.createInterface({ input: proc.stdout! });
      rl.once("line", (line) => {
        clearTimeout(timer);
        try {
          const msg = JSON.parse(line);
          if (!msg.ready) throw new Error(`unexpected ready line: ${line}`);
          resolve(msg as SimPorts);
        } catch (err) {
          reject(err as Error);
        }
      });
      proc.once("error", (err) => {
        clearTimeout(timer);
        reject(err);
      });
      proc.once("exit", (code) => {
        clearTimeout(timer);
        reject(new Error(`simserver exited early with code ${code}`));
      });
    });
    return new SimServerProcess(proc, ports);
  }

  async stop(): Promise<void> {
    this.proc.kill("SIGINT");
    await new Promise<void>((resolve) => {
      const t = setTimeout(() => {
        this.proc.kill("SIGKILL");
        resolve();
      }, 3000);
      this.proc.once("exit", () => {
        clearTimeout(t);
        resolve();
      });
    });
  }
}
