/**
 * Invokes the core CLI as a subprocess. Core error messages from stderr are
 * re-thrown verbatim so callers see exactly what the core reported.
 */

import { spawnSync } from "node:child_process";

export class CoreError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
  ) {
    super(message);
    this.name = "CoreError";
  }
}

const PYTHON = process.env.RIRKIT_PYTHON ?? "python3";

export function runCli(args: string[], cwd?: string): string {
  const proc = spawnSync(PYTHON, ["-m", "rirkit.cli", ...args], {
    cwd,
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw proc.error;
  }
  if (proc.status !== 0) {
    const stderr = (proc.stderr ?? "").trim();
    // the CLI prefixes its own failures with "error: "
    const line = stderr.split("\n").find((l) => l.startsWith("error: "));
    const message = line ? line.slice("error: ".length) : stderr || `CLI exited with ${proc.status}`;
    throw new CoreError(message, proc.status ?? -1);
  }
  return proc.stdout ?? "";
}
