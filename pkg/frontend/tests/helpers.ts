/** Shared test helpers: spawn the Python session service and CLI commands. */

import { type ChildProcess, execFile, spawn } from "node:child_process";
import { once } from "node:events";
import { promisify } from "node:util";

export const execFileAsync = promisify(execFile);

export interface RunningService {
  baseUrl: string;
  child: ChildProcess;
  stop(): Promise<void>;
}

/** Start `pursuitsim serve` on an ephemeral port and wait for readiness. */
export async function startService(extraArgs: string[] = []): Promise<RunningService> {
  const child = spawn("python3", ["-m", "pursuitsim.cli", "serve", "--port", "0", ...extraArgs], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const baseUrl = await new Promise<string>((resolve, reject) => {
    let output = "";
    const timer = setTimeout(
      () => reject(new Error(`service did not report readiness: ${output}`)),
      15_000,
    );
    child.stdout!.on("data", (chunk: Buffer) => {
      output += chunk.toString();
      const match = output.match(/listening on (http:\/\/[\d.]+:\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    child.stderr!.on("data", (chunk: Buffer) => {
      output += chunk.toString();
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (code ${code}): ${output}`));
    });
  });
  return {
    baseUrl,
    child,
    async stop() {
      child.kill("SIGINT");
      await Promise.race([once(child, "exit"), new Promise((r) => setTimeout(r, 3000))]);
      if (child.exitCode === null) child.kill("SIGKILL");
    },
  };
}

export async function runCli(args: string[]): Promise<{ stdout: string; stderr: string }> {
  return execFileAsync("python3", ["-m", "pursuitsim.cli", ...args]);
}
