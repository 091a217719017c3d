/** Transition ring buffer with attentive (cosine top-k) batch selection.
 *
 * Mirrors the core library's semantics: uniform pre-sample of k*bs entries
 * without replacement, ranked by cosine similarity between the stored
 * observation and the query state, top bs kept, ties broken by ascending
 * buffer index. Conformance vectors shared with the core live in
 * ../tests/fixtures/aer_conformance.json.
 */

import { Rng } from "./nn.js";

export interface Transition {
  obs: Float32Array;
  action: Float32Array;
  reward: number;
  nextObs: Float32Array;
  done: boolean;
}

export function cosineSimilarity(a: ArrayLike<number>, b: ArrayLike<number>): number {
  if (a.length !== b.length) throw new Error("vector lengths differ");
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na === 0 || nb === 0) return 0;
  return dot / (Math.sqrt(na) * Math.sqrt(nb));
}

/** Rank a pre-sample by similarity to the query and keep the top bs. */
export function selectAttentive(
  obsOf: (index: number) => ArrayLike<number>,
  presample: number[],
  query: ArrayLike<number>,
  bs: number,
): number[] {
  const scored = presample.map((idx) => ({ idx, sim: cosineSimilarity(obsOf(idx), query) }));
  scored.sort((a, b) => (b.sim - a.sim) || (a.idx - b.idx));
  return scored.slice(0, bs).map((s) => s.idx);
}

export class ReplayBuffer {
  readonly capacity: number;
  readonly obsDim: number;
  readonly actionDim: number;
  count = 0;
  writeIndex = 0;
  private obs: Float32Array;
  private actions: Float32Array;
  private rewards: Float32Array;
  private nextObs: Float32Array;
  private dones: Uint8Array;

  constructor(capacity: number, obsDim = 49, actionDim = 3) {
    this.capacity = capacity;
    this.obsDim = obsDim;
    this.actionDim = actionDim;
    this.obs = new Float32Array(capacity * obsDim);
    this.actions = new Float32Array(capacity * actionDim);
    this.rewards = new Float32Array(capacity);
    this.nextObs = new Float32Array(capacity * obsDim);
    this.dones = new Uint8Array(capacity);
  }

  push(t: Transition): void {
    const i = this.writeIndex;
    this.obs.set(t.obs, i * this.obsDim);
    this.actions.set(t.action, i * this.actionDim);
    this.rewards[i] = t.reward;
    this.nextObs.set(t.nextObs, i * this.obsDim);
    this.dones[i] = t.done ? 1 : 0;
    this.writeIndex = (i + 1) % this.capacity;
    this.count = Math.min(this.count + 1, this.capacity);
  }

  obsAt(i: number): Float32Array {
    return this.obs.subarray(i * this.obsDim, (i + 1) * this.obsDim);
  }

  actionAt(i: number): Float32Array {
    return this.actions.subarray(i * this.actionDim, (i + 1) * this.actionDim);
  }

  rewardAt(i: number): number {
    return this.rewards[i];
  }

  nextObsAt(i: number): Float32Array {
    return this.nextObs.subarray(i * this.obsDim, (i + 1) * this.obsDim);
  }

  doneAt(i: number): boolean {
    return this.dones[i] === 1;
  }

  sampleAttentive(query: ArrayLike<number>, bs: number, k: number, rng: Rng): number[] {
    if (this.count < bs) throw new Error(`buffer holds ${this.count} < bs=${bs}`);
    const m = Math.min(k * bs, this.count);
    const pre = rng.sampleWithoutReplacement(this.count, m);
    return selectAttentive((i) => this.obsAt(i), pre, query, bs);
  }
}

/**
 * Read a core-library replay snapshot (little-endian "AERB" format) and
 * return its transitions oldest-slot-first. Rewards come back unscaled.
 */
export function loadSnapshotTransitions(buf: Buffer): Transition[] {
  if (buf.length < 40 || buf.toString("ascii", 0, 4) !== "AERB") {
    throw new Error("not a replay buffer snapshot");
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) throw new Error(`unsupported snapshot version ${version}`);
  const count = Number(buf.readBigUInt64LE(16));
  const obsDim = buf.readUInt32LE(32);
  const actionDim = buf.readUInt32LE(36);
  let off = 40;
  const readF32 = (n: number) => {
    const arr = new Float32Array(n);
    for (let i = 0; i < n; i++) arr[i] = buf.readFloatLE(off + i * 4);
    off += n * 4;
    return arr;
  };
  const obs = readF32(count * obsDim);
  const actions = readF32(count * actionDim);
  const rewards = readF32(count);
  const nextObs = readF32(count * obsDim);
  const dones = buf.subarray(off, off + count);
  const out: Transition[] = [];
  for (let i = 0; i < count; i++) {
    out.push({
      obs: obs.slice(i * obsDim, (i + 1) * obsDim),
      action: actions.slice(i * actionDim, (i + 1) * actionDim),
      reward: rewards[i],
      nextObs: nextObs.slice(i * obsDim, (i + 1) * obsDim),
      done: dones[i] === 1,
    });
  }
  return out;
}
