/**
 * Policy agent server: exposes a trained actor over the benchmark runner's
 * agent protocol, so the core `bench run --policy agent:HOST:PORT` produces
 * full metrics CSVs (bench format) for the learned policy.
 */

import net from "node:net";

import { Actor } from "./tqc.js";

export function servePolicy(actor: Actor, port: number,
                            onReady?: (port: number) => void): net.Server {
  const server = net.createServer((socket) => {
    let buffer = "";
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf8");
      let idx: number;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 1);
        try {
          const msg = JSON.parse(line);
          const obs = Float64Array.from(msg.obs as number[]);
          const action = actor.deterministic(obs);
          socket.write(JSON.stringify({ action }) + "\n");
        } catch {
          socket.write(JSON.stringify({ error: "bad_request" }) + "\n");
          socket.destroy();
          return;
        }
      }
    });
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address();
    if (addr && typeof addr === "object") onReady?.(addr.port);
  });
  return server;
}
