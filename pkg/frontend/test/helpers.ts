import { ChildProcess, spawn } from "node:child_process";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { EnvClient } from "../src/envClient.js";

const here = path.dirname(fileURLToPath(import.meta.url));
export const PKG_ROOT = path.join(here, "..", "..");

export interface EnvServerHandle {
  port: number;
  proc: ChildProcess;
  stop: () => void;
}

function freePort(): Promise<number> {
  return new Promise((resolve) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as net.AddressInfo).port;
      srv.close(() => resolve(port));
    });
  });
}

/** Spawn the core environment server and wait for it to answer spec. */
export async function spawnEnvServer(): Promise<EnvServerHandle> {
  const port = await freePort();
  const proc = spawn("python3", ["-m", "planarpush.cli", "serve", "--port", String(port)],
                     { cwd: PKG_ROOT, stdio: ["ignore", "ignore", "pipe"] });
  let stderr = "";
  proc.stderr?.on("data", (d) => { stderr += d.toString(); });
  for (let i = 0; i < 300; i++) {
    try {
      const client = await EnvClient.connect("127.0.0.1", port, 500);
      await client.spec();
      await client.close();
      return { port, proc, stop: () => proc.kill() };
    } catch {
      if (proc.exitCode !== null) break;
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  proc.kill();
  throw new Error(`environment server did not come up: ${stderr.slice(0, 500)}`);
}
