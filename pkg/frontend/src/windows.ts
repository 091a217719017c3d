/** Local-window dataset collection over the wire protocol. */

import { readFileSync, writeFileSync } from "node:fs";

import { EnvClient } from "./envClient.js";
import { Rng } from "./nn.js";

const MAGIC = 0x50505744; // "PPWD"
const VERSION = 1;

export interface WindowDataset {
  n: number;
  h: number;
  w: number;
  data: Float32Array; // n * h * w
  blankFraction: number;
}

export function saveDataset(ds: WindowDataset, path: string): void {
  const header = Buffer.alloc(16);
  header.writeUInt32LE(MAGIC, 0);
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(ds.n, 8);
  header.writeUInt16LE(ds.h, 12);
  header.writeUInt16LE(ds.w, 14);
  writeFileSync(path, Buffer.concat([header, Buffer.from(ds.data.buffer,
                                                         ds.data.byteOffset,
                                                         ds.data.byteLength)]));
}

export function loadDataset(path: string): WindowDataset {
  const buf = readFileSync(path);
  if (buf.readUInt32LE(0) !== MAGIC || buf.readUInt32LE(4) !== VERSION) {
    throw new Error("not a window dataset file");
  }
  const n = buf.readUInt32LE(8);
  const h = buf.readUInt16LE(12);
  const w = buf.readUInt16LE(14);
  const data = new Float32Array(n * h * w);
  const body = buf.subarray(16);
  for (let i = 0; i < data.length; i++) data[i] = body.readFloatLE(i * 4);
  let blanks = 0;
  for (let i = 0; i < n; i++) {
    let any = false;
    for (let p = 0; p < h * w; p++) if (data[i * h * w + p] !== 0) { any = true; break; }
    if (!any) blanks += 1;
  }
  return { n, h, w, data, blankFraction: blanks / n };
}

const SUITES = ["env_a", "env_b", "env_c", "env_d", "env_e"];

function scenarioDict(suite: string, seed: number) {
  return {
    suite_id: suite,
    obstacle_params: {},
    pushee_shape: { kind: "box", half_extents: [0.025, 0.025] },
    rng_seed: seed,
  };
}

/**
 * Collect `n` windows by stepping random actions against the served
 * environment; roughly 10% of the dataset is kept blank (all background).
 */
export async function collectWindows(
  host: string, port: number, n: number, seed: number,
  log?: (msg: string) => void,
): Promise<WindowDataset> {
  const client = await EnvClient.connect(host, port);
  const spec = await client.spec();
  if (!spec.extensions.includes("window")) {
    throw new Error("server does not expose the window extension");
  }
  const rng = new Rng(seed);
  const pix = 64 * 64;
  const data = new Float32Array(n * pix);
  const targetBlanks = Math.round(0.1 * n);
  let got = 0;
  let blanks = 0;
  let episode = 0;
  while (got < n) {
    const suite = SUITES[episode % SUITES.length];
    await client.reset({
      seed: seed + episode,
      scenario: scenarioDict(suite, seed + episode),
      max_steps: 40,
      d_min: 0.2,
      d_max: 0.6,
    });
    episode += 1;
    for (let step = 0; step < 40 && got < n; step++) {
      const action = [rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01),
                      rng.uniform(-0.087, 0.087)];
      const reply = await client.step(action);
      if (step % 2 === 0) {
        const win = await client.window();
        let any = false;
        const flat = new Float32Array(pix);
        for (let r = 0; r < 64; r++) {
          for (let c = 0; c < 64; c++) {
            const v = win.window[r][c];
            flat[r * 64 + c] = v;
            if (v !== 0) any = true;
          }
        }
        if (!any && blanks >= targetBlanks) continue; // keep ~10% blanks
        data.set(flat, got * pix);
        if (!any) blanks += 1;
        got += 1;
        if (log && got % 1000 === 0) log(`collected ${got}/${n} (${blanks} blank)`);
      }
      if (reply.done) break;
    }
  }
  // top up blanks if the scenes produced too few
  while (blanks < targetBlanks && got > 0) {
    const victim = rng.int(got);
    let any = false;
    for (let p = 0; p < pix; p++) if (data[victim * pix + p] !== 0) { any = true; break; }
    if (!any) continue;
    data.fill(0, victim * pix, (victim + 1) * pix);
    blanks += 1;
  }
  await client.close();
  return { n, h: 64, w: 64, data, blankFraction: blanks / n };
}
