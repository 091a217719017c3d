/** TCP client for the environment wire protocol (newline-delimited JSON). */

import net from "node:net";

export interface StepReply {
  obs: number[];
  reward: { dist: number; collision: number; touch: number; total: number };
  done: boolean;
  info: { contact: boolean; collision: boolean; oob: boolean; path_len: number };
}

export interface SpecReply {
  protocol_version: number;
  obs_dim: number;
  action_dim: number;
  action_caps: number[];
  extensions: string[];
}

export class EnvClient {
  private socket: net.Socket;
  private buffer = "";
  private waiters: Array<(line: string) => void> = [];

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", (chunk) => {
      this.buffer += chunk.toString("utf8");
      let idx: number;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx);
        this.buffer = this.buffer.slice(idx + 1);
        const waiter = this.waiters.shift();
        if (waiter) waiter(line);
      }
    });
  }

  static connect(host: string, port: number, timeoutMs = 20000): Promise<EnvClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error(`connect timeout to ${host}:${port}`));
      }, timeoutMs);
      socket.once("connect", () => {
        clearTimeout(timer);
        socket.setNoDelay(true);
        resolve(new EnvClient(socket));
      });
      socket.once("error", (e) => {
        clearTimeout(timer);
        reject(e);
      });
    });
  }

  request(payload: unknown): Promise<any> {
    return new Promise((resolve, reject) => {
      this.waiters.push((line) => {
        try {
          resolve(JSON.parse(line));
        } catch (e) {
          reject(e);
        }
      });
      this.socket.write(JSON.stringify(payload) + "\n", (err) => {
        if (err) reject(err);
      });
    });
  }

  async spec(): Promise<SpecReply> {
    return this.request({ cmd: "spec" });
  }

  async reset(config: Record<string, unknown> = {}): Promise<{ obs: number[] }> {
    const reply = await this.request({ cmd: "reset", config });
    if (reply.error) throw new Error(`reset failed: ${JSON.stringify(reply)}`);
    return reply;
  }

  async step(action: number[]): Promise<StepReply> {
    const reply = await this.request({ cmd: "step", action });
    if (reply.error) throw new Error(`step failed: ${JSON.stringify(reply)}`);
    return reply;
  }

  async window(): Promise<{ shape: number[]; window: number[][] }> {
    const reply = await this.request({ cmd: "window" });
    if (reply.error) throw new Error(`window failed: ${JSON.stringify(reply)}`);
    return reply;
  }

  async close(): Promise<void> {
    try {
      await this.request({ cmd: "close" });
    } catch {
      // connection may already be gone
    }
    this.socket.destroy();
  }
}
