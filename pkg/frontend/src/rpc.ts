/**
 * Bridge to the native control stack.
 *
 * Spawns `python -m pandasim.bridge` and speaks newline-delimited JSON-RPC
 * over its stdio. One bridge process owns one robot session (desk handle,
 * robot handle, gripper, running controller), so scripted flows execute on
 * exactly the same native code path as in-process callers.
 */

import { ChildProcessByStdio, spawn } from "node:child_process";
import * as path from "node:path";
import * as readline from "node:readline";
import { fileURLToPath } from "node:url";

/** Error raised by the native side, carrying the exception class name. */
export class BridgeError extends Error {
  constructor(public readonly kind: string, message: string) {
    super(`${kind}: ${message}`);
    this.name = "BridgeError";
  }
}

interface Pending {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

type BridgeProcess = ChildProcessByStdio<NodeJS.WritableStream & import("node:stream").Writable,
                                         import("node:stream").Readable, null>;

/** Repository root, resolved from the compiled file location. */
export function repoRoot(): string {
  const here = path.dirname(fileURLToPath(import.meta.url));
  // dist/src/rpc.js -> frontend/dist/src -> repo root is three levels up.
  return path.resolve(here, "..", "..", "..");
}

export function pythonEnv(): NodeJS.ProcessEnv {
  const env = { ...process.env };
  const src = path.join(repoRoot(), "src");
  env.PYTHONPATH = env.PYTHONPATH ? src + path.delimiter + env.PYTHONPATH : src;
  return env;
}

export function pythonExecutable(): string {
  return process.env.PANDASIM_PYTHON ?? "python3";
}

export class Bridge {
  private pending = new Map<number, Pending>();
  private nextId = 1;
  private closed = false;

  private constructor(private readonly proc: BridgeProcess) {
    const rl = readline.createInterface({ input: proc.stdout });
    rl.on("line", (line) => this.onLine(line));
    proc.on("exit", () => this.failAll(new Error("bridge process exited")));
    proc.on("error", (err) => this.failAll(err));
  }

  static async spawn(): Promise<Bridge> {
    const proc = spawn(pythonExecutable(), ["-m", "pandasim.bridge"], {
      env: pythonEnv(),
      stdio: ["pipe", "pipe", "inherit"],
    });
    return new Bridge(proc);
  }

  private onLine(line: string): void {
    let msg: { id?: number; result?: unknown; error?: { type: string; message: string } };
    try {
      msg = JSON.parse(line);
    } catch {
      return;
    }
    if (msg.id === undefined || msg.id === null) return;
    const entry = this.pending.get(msg.id);
    if (!entry) return;
    this.pending.delete(msg.id);
    if (msg.error) {
      entry.reject(new BridgeError(msg.error.type, msg.error.message));
    } else {
      entry.resolve(msg.result);
    }
  }

  private failAll(err: Error): void {
    if (this.closed) return;
    this.closed = true;
    for (const entry of this.pending.values()) entry.reject(err);
    this.pending.clear();
  }

  call<T = unknown>(method: string, params: Record<string, unknown> = {}): Promise<T> {
    if (this.closed) return Promise.reject(new Error("bridge is closed"));
    const id = this.nextId++;
    const payload = JSON.stringify({ id, method, params }) + "\n";
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (v: unknown) => void, reject });
      this.proc.stdin.write(payload, (err) => {
        if (err) {
          this.pending.delete(id);
          reject(err);
        }
      });
    });
  }

  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.call("close");
    } catch {
      // the session may already be gone; shutting down regardless
    }
    this.closed = true;
    this.proc.stdin.end();
    await new Promise<void>((resolve) => {
      const t = setTimeout(() => {
        this.proc.kill();
        resolve();
      }, 2000);
      this.proc.once("exit", () => {
        clearTimeout(t);
        resolve();
      });
    });
  }
}
