/**
 * Truncated Quantile Critics agent with attentive replay.
 *
 * Distributional critics emit M quantiles each; targets pool all critics'
 * quantiles at the next state, drop the top `dropPerNet * nCritics` of them
 * (fighting overestimation) and regress the rest through the quantile Huber
 * loss. The actor is a tanh-squashed Gaussian trained against the mean of
 * all critic quantiles with a fixed entropy temperature. Batches come from
 * the attentive replay buffer using the agent's current observation as the
 * similarity query.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { ReplayBuffer, loadSnapshotTransitions } from "./aer.js";
import { EnvClient } from "./envClient.js";
import { Adam, Dense, Param, Relu, Rng, zeroGrads } from "./nn.js";

export interface TqcConfig {
  obsDim: number;
  actionDim: number;
  hidden: number[];
  nCritics: number;
  nQuantiles: number;
  dropPerNet: number;
  gamma: number;
  tau: number;
  lr: number;
  alpha: number;
  batchSize: number;
  presampleK: number;
  bufferCapacity: number;
  actionNoiseSd: number;
  rewardScale: number;
  seed: number;
}

/** Paper-mirroring defaults; desk-scale runs override the heavy fields. */
export const DEFAULT_TQC_CONFIG: TqcConfig = {
  obsDim: 49,
  actionDim: 3,
  hidden: [512, 256, 128],
  nCritics: 2,
  nQuantiles: 25,
  dropPerNet: 2,
  gamma: 0.95,
  tau: 0.005,
  lr: 3e-4,
  alpha: 0.05,
  batchSize: 512,
  presampleK: 4,
  bufferCapacity: 1_000_000,
  actionNoiseSd: 0.4,
  rewardScale: 0.1,
  seed: 0,
};

const ACTION_CAPS = [0.01, 0.01, 0.08726646259971647];
const LOGSTD_MIN = -5;
const LOGSTD_MAX = 2;

class Mlp {
  layers: Dense[] = [];
  relus: Relu[] = [];

  constructor(sizes: number[], rng: Rng, outScale = 0.1) {
    for (let i = 0; i + 1 < sizes.length; i++) {
      const last = i + 2 === sizes.length;
      this.layers.push(new Dense(sizes[i], sizes[i + 1], rng, last ? outScale / Math.sqrt(sizes[i]) : undefined));
      if (!last) this.relus.push(new Relu());
    }
  }

  params(): Param[] {
    return this.layers.flatMap((l) => l.params());
  }

  forward(x: Float64Array, B: number): Float64Array {
    let h = x;
    for (let i = 0; i < this.layers.length; i++) {
      h = this.layers[i].forward(h, B);
      if (i < this.relus.length) h = this.relus[i].forward(h);
    }
    return h;
  }

  backward(g: Float64Array): Float64Array {
    for (let i = this.layers.length - 1; i >= 0; i--) {
      if (i < this.relus.length) g = this.relus[i].backward(g);
      g = this.layers[i].backward(g);
    }
    return g;
  }

  copyFrom(other: Mlp): void {
    for (let i = 0; i < this.layers.length; i++) {
      this.layers[i].w.value.set(other.layers[i].w.value);
      this.layers[i].b.value.set(other.layers[i].b.value);
    }
  }

  polyakFrom(other: Mlp, tau: number): void {
    for (let i = 0; i < this.layers.length; i++) {
      const tw = this.layers[i].w.value;
      const ow = other.layers[i].w.value;
      for (let k = 0; k < tw.length; k++) tw[k] += tau * (ow[k] - tw[k]);
      const tb = this.layers[i].b.value;
      const ob = other.layers[i].b.value;
      for (let k = 0; k < tb.length; k++) tb[k] += tau * (ob[k] - tb[k]);
    }
  }
}

interface ActorSample {
  aT: Float64Array;      // tanh-squashed actions in [-1, 1]^d, B x d
  logp: Float64Array;    // per sample, length B
  mean: Float64Array;
  logstd: Float64Array;
  eps: Float64Array;
  trunkOut: Float64Array;
}

export class Actor {
  trunk: Mlp;
  meanHead: Dense;
  logstdHead: Dense;

  constructor(cfg: TqcConfig, rng: Rng) {
    this.trunk = new Mlp([cfg.obsDim, ...cfg.hidden], rng);
    const h = cfg.hidden[cfg.hidden.length - 1];
    this.meanHead = new Dense(h, cfg.actionDim, rng, 0.01 / Math.sqrt(h));
    this.logstdHead = new Dense(h, cfg.actionDim, rng, 0.01 / Math.sqrt(h));
    // start exploration at the configured noise scale
    this.logstdHead.b.value.fill(Math.log(cfg.actionNoiseSd));
  }

  params(): Param[] {
    return [...this.trunk.params(), ...this.meanHead.params(), ...this.logstdHead.params()];
  }

  sample(obs: Float64Array, B: number, rng: Rng | null): ActorSample {
    const trunkOut = this.trunk.forward(obs, B);
    const mean = this.meanHead.forward(trunkOut, B);
    const logstd = this.logstdHead.forward(trunkOut, B);
    const d = mean.length / B;
    const eps = new Float64Array(mean.length);
    const aT = new Float64Array(mean.length);
    const logp = new Float64Array(B);
    for (let i = 0; i < mean.length; i++) {
      let ls = logstd[i];
      ls = Math.max(LOGSTD_MIN, Math.min(LOGSTD_MAX, ls));
      logstd[i] = ls;
      const e = rng ? rng.normal() : 0;
      eps[i] = e;
      const u = mean[i] + Math.exp(ls) * e;
      const a = Math.tanh(u);
      aT[i] = a;
      const n = Math.floor(i / d);
      logp[n] += -0.5 * e * e - 0.5 * Math.log(2 * Math.PI) - ls
        - Math.log(1 - a * a + 1e-6);
    }
    return { aT, logp, mean, logstd, eps, trunkOut };
  }

  /**
   * Backward pass of the actor objective alpha*logp - Q given dQ/da and the
   * cached sample; accumulates parameter gradients.
   */
  backwardObjective(s: ActorSample, dQda: Float64Array, alpha: number, B: number): void {
    const d = s.mean.length / B;
    const gMean = new Float64Array(s.mean.length);
    const gLogstd = new Float64Array(s.mean.length);
    for (let i = 0; i < s.mean.length; i++) {
      const a = s.aT[i];
      const oneMa2 = 1 - a * a;
      const sigEps = Math.exp(s.logstd[i]) * s.eps[i];
      const dadMu = oneMa2;
      const dadLs = oneMa2 * sigEps;
      const dlogpDa = (2 * a) / (1 - a * a + 1e-6);
      // objective per sample averaged over batch
      const scale = 1 / B;
      gMean[i] = scale * (alpha * dlogpDa * dadMu - dQda[i] * dadMu);
      gLogstd[i] = scale * (alpha * (-1 + dlogpDa * dadLs) - dQda[i] * dadLs);
      // clamp boundary: no gradient outside the clamp range
      if (s.logstd[i] <= LOGSTD_MIN || s.logstd[i] >= LOGSTD_MAX) gLogstd[i] = 0;
    }
    const g1 = this.meanHead.backward(gMean);
    const g2 = this.logstdHead.backward(gLogstd);
    for (let i = 0; i < g1.length; i++) g1[i] += g2[i];
    this.trunk.backward(g1);
  }

  deterministic(obs: Float64Array): number[] {
    const s = this.sample(obs, 1, null);
    return Array.from(s.aT, (a, i) => a * ACTION_CAPS[i]);
  }

  exportWeights(): unknown {
    const dump = (d: Dense) => ({ w: Array.from(d.w.value), b: Array.from(d.b.value) });
    return {
      trunk: this.trunk.layers.map(dump),
      mean: dump(this.meanHead),
      logstd: dump(this.logstdHead),
    };
  }

  loadWeights(doc: any): void {
    doc.trunk.forEach((l: any, i: number) => {
      this.trunk.layers[i].w.value.set(l.w);
      this.trunk.layers[i].b.value.set(l.b);
    });
    this.meanHead.w.value.set(doc.mean.w);
    this.meanHead.b.value.set(doc.mean.b);
    this.logstdHead.w.value.set(doc.logstd.w);
    this.logstdHead.b.value.set(doc.logstd.b);
  }
}

export class TqcAgent {
  cfg: TqcConfig;
  rng: Rng;
  actor: Actor;
  critics: Mlp[];
  targets: Mlp[];
  actorOpt: Adam;
  criticOpt: Adam;
  buffer: ReplayBuffer;
  taus: Float64Array;

  constructor(cfg: Partial<TqcConfig> = {}) {
    this.cfg = { ...DEFAULT_TQC_CONFIG, ...cfg };
    const c = this.cfg;
    this.rng = new Rng(c.seed + 7777);
    this.actor = new Actor(c, this.rng);
    const criticSizes = [c.obsDim + c.actionDim, ...c.hidden, c.nQuantiles];
    this.critics = Array.from({ length: c.nCritics }, () => new Mlp(criticSizes, this.rng));
    this.targets = Array.from({ length: c.nCritics }, () => new Mlp(criticSizes, this.rng));
    for (let i = 0; i < c.nCritics; i++) this.targets[i].copyFrom(this.critics[i]);
    this.actorOpt = new Adam(c.lr);
    this.criticOpt = new Adam(c.lr);
    this.buffer = new ReplayBuffer(c.bufferCapacity, c.obsDim, c.actionDim);
    this.taus = new Float64Array(c.nQuantiles);
    for (let i = 0; i < c.nQuantiles; i++) this.taus[i] = (2 * i + 1) / (2 * c.nQuantiles);
  }

  private criticInput(obs: Float64Array, act: Float64Array, B: number): Float64Array {
    const c = this.cfg;
    const x = new Float64Array(B * (c.obsDim + c.actionDim));
    for (let n = 0; n < B; n++) {
      x.set(obs.subarray(n * c.obsDim, (n + 1) * c.obsDim), n * (c.obsDim + c.actionDim));
      x.set(act.subarray(n * c.actionDim, (n + 1) * c.actionDim),
            n * (c.obsDim + c.actionDim) + c.obsDim);
    }
    return x;
  }

  /** One gradient update from an attentive batch; returns the critic loss. */
  update(queryObs: Float32Array): number {
    const c = this.cfg;
    const B = c.batchSize;
    const idx = this.buffer.sampleAttentive(queryObs, B, c.presampleK, this.rng);
    const obs = new Float64Array(B * c.obsDim);
    const act = new Float64Array(B * c.actionDim);
    const rew = new Float64Array(B);
    const nxt = new Float64Array(B * c.obsDim);
    const done = new Float64Array(B);
    idx.forEach((bi, n) => {
      obs.set(this.buffer.obsAt(bi), n * c.obsDim);
      act.set(this.buffer.actionAt(bi), n * c.actionDim);
      rew[n] = this.buffer.rewardAt(bi);
      nxt.set(this.buffer.nextObsAt(bi), n * c.obsDim);
      done[n] = this.buffer.doneAt(bi) ? 1 : 0;
    });

    // targets: pooled truncated quantiles at the next state
    const nextSample = this.actor.sample(nxt, B, this.rng);
    const nextIn = this.criticInput(nxt, nextSample.aT, B);
    const M = c.nQuantiles;
    const pool = this.targets.map((t) => t.forward(nextIn, B));
    const totalQ = c.nCritics * M;
    const keep = totalQ - c.dropPerNet * c.nCritics;
    const y = new Float64Array(B * keep);
    const row = new Float64Array(totalQ);
    for (let n = 0; n < B; n++) {
      for (let m = 0; m < c.nCritics; m++)
        for (let q = 0; q < M; q++) row[m * M + q] = pool[m][n * M + q];
      row.sort();
      for (let j = 0; j < keep; j++) {
        y[n * keep + j] = rew[n] + c.gamma * (1 - done[n])
          * (row[j] - c.alpha * nextSample.logp[n]);
      }
    }

    // critic quantile-huber regression
    const input = this.criticInput(obs, act, B);
    let loss = 0;
    zeroGrads(this.critics.flatMap((cr) => cr.params()));
    for (const critic of this.critics) {
      const theta = critic.forward(input, B);
      const g = new Float64Array(theta.length);
      for (let n = 0; n < B; n++) {
        for (let i = 0; i < M; i++) {
          const t = theta[n * M + i];
          const tau = this.taus[i];
          let gi = 0;
          for (let j = 0; j < keep; j++) {
            const delta = y[n * keep + j] - t;
            const w = Math.abs(tau - (delta < 0 ? 1 : 0));
            const h = Math.abs(delta) <= 1 ? 0.5 * delta * delta
              : Math.abs(delta) - 0.5;
            loss += (w * h) / (B * M * keep);
            const hPrime = Math.max(-1, Math.min(1, delta));
            gi += (-w * hPrime) / (B * M * keep);
          }
          g[n * M + i] = gi;
        }
      }
      critic.backward(g);
    }
    this.criticOpt.step(this.critics.flatMap((cr) => cr.params()));

    // actor: maximize mean of all critic quantiles minus entropy penalty
    const actorParams = this.actor.params();
    zeroGrads(actorParams);
    zeroGrads(this.critics.flatMap((cr) => cr.params()));
    const sample = this.actor.sample(obs, B, this.rng);
    const actorIn = this.criticInput(obs, sample.aT, B);
    const dQda = new Float64Array(B * c.actionDim);
    for (const critic of this.critics) {
      const theta = critic.forward(actorIn, B);
      const g = new Float64Array(theta.length);
      g.fill(1 / (M * c.nCritics)); // d(meanQ)/dtheta per element (per sample)
      const dIn = critic.backward(g);
      for (let n = 0; n < B; n++)
        for (let d = 0; d < c.actionDim; d++)
          dQda[n * c.actionDim + d] += dIn[n * (c.obsDim + c.actionDim) + c.obsDim + d];
    }
    this.actor.backwardObjective(sample, dQda, c.alpha, B);
    this.actorOpt.step(actorParams);
    // discard the spurious critic grads accumulated through the actor pass
    zeroGrads(this.critics.flatMap((cr) => cr.params()));

    for (let i = 0; i < c.nCritics; i++) this.targets[i].polyakFrom(this.critics[i], c.tau);
    return loss;
  }
}

export const CURRICULUM_DMAX = [0.06, 0.12, 0.2, 0.3, 0.45, 0.6];

export interface TrainResult {
  steps: number;
  episodes: number;
  stage: number;
  successes: number;
}

function scenarioDict(suite: string, seed: number) {
  return {
    suite_id: suite,
    obstacle_params: {},
    pushee_shape: { kind: "box", half_extents: [0.025, 0.025] },
    rng_seed: seed,
  };
}

export interface TrainOptions {
  suite: string;
  totalSteps: number;
  warmupSteps: number;
  updateEvery: number;
  maxEpisodeSteps: number;
  dMin: number;
  /** Optional core-format replay snapshot (e.g. baseline demonstrations)
   * used to seed the buffer before online interaction. */
  demoSnapshot?: string;
  checkpointPath?: string;
  checkpointEvery?: number;
  log?: (msg: string) => void;
}

export async function trainTqc(
  agent: TqcAgent, host: string, port: number, opts: TrainOptions,
): Promise<TrainResult> {
  if (opts.demoSnapshot) {
    const demos = loadSnapshotTransitions(readFileSync(opts.demoSnapshot));
    for (const t of demos) {
      agent.buffer.push({ ...t, reward: t.reward * agent.cfg.rewardScale });
    }
    opts.log?.(`seeded buffer with ${demos.length} demonstration transitions`);
  }
  const client = await EnvClient.connect(host, port);
  const rng = new Rng(agent.cfg.seed + 31);
  let stage = 0;
  const window: number[] = [];
  let episodes = 0;
  let successes = 0;
  let steps = 0;
  let episodeSeed = agent.cfg.seed * 100_000;

  while (steps < opts.totalSteps) {
    const dMax = CURRICULUM_DMAX[stage];
    const reset = await client.reset({
      seed: episodeSeed,
      scenario: scenarioDict(opts.suite, episodeSeed),
      d_min: Math.min(opts.dMin, dMax),
      d_max: dMax,
      max_steps: opts.maxEpisodeSteps,
      start_theta: 0.0,
    });
    episodeSeed += 1;
    let obs = Float32Array.from(reset.obs);
    let done = false;
    let success = false;
    while (!done && steps < opts.totalSteps) {
      let action: number[];
      let aT: Float64Array;
      if (steps < opts.warmupSteps) {
        aT = Float64Array.from({ length: 3 }, () => rng.uniform(-1, 1));
        action = Array.from(aT, (a, i) => a * ACTION_CAPS[i]);
      } else {
        const s = agent.actor.sample(Float64Array.from(obs), 1, agent.rng);
        aT = Float64Array.from(s.aT);
        action = Array.from(aT, (a, i) => a * ACTION_CAPS[i]);
      }
      const reply = await client.step(action);
      const nextObs = Float32Array.from(reply.obs);
      done = reply.done;
      success = done && reply.reward.dist === 50;
      // bootstrap through pure time-limit truncations: only goal or
      // out-of-bounds endings are real terminals
      const terminal = done && (success || reply.info.oob);
      agent.buffer.push({
        obs, action: Float32Array.from(aT),
        // scaled for value-learning conditioning only; evaluation rewards
        // are untouched
        reward: reply.reward.total * agent.cfg.rewardScale,
        nextObs, done: terminal,
      });
      obs = nextObs;
      steps += 1;
      if (steps >= opts.warmupSteps && steps % opts.updateEvery === 0
          && agent.buffer.count >= agent.cfg.batchSize) {
        agent.update(obs);
      }
      if (opts.checkpointPath && opts.checkpointEvery
          && steps % opts.checkpointEvery === 0) {
        writeFileSync(opts.checkpointPath,
                      JSON.stringify(agent.actor.exportWeights()));
      }
    }
    episodes += 1;
    if (success) successes += 1;
    window.push(success ? 1 : 0);
    if (window.length > 50) window.shift();
    const rate = window.reduce((a, b) => a + b, 0) / window.length;
    if (window.length >= 50 && rate >= 0.8 && stage < CURRICULUM_DMAX.length - 1) {
      stage += 1; // never regresses
      window.length = 0;
      opts.log?.(`curriculum advanced to stage ${stage} (d_max ${CURRICULUM_DMAX[stage]})`);
    }
    if (opts.log && episodes % 25 === 0) {
      opts.log(`episode ${episodes}: steps ${steps}, rolling success ${rate.toFixed(2)}, `
        + `stage ${stage}`);
    }
  }
  if (opts.checkpointPath) {
    writeFileSync(opts.checkpointPath, JSON.stringify(agent.actor.exportWeights()));
  }
  await client.close();
  return { steps, episodes, stage, successes };
}

/** Success rate of a policy over n protocol episodes (deterministic seeds). */
export async function evaluatePolicy(
  host: string, port: number, suite: string, n: number, baseSeed: number,
  policy: (obs: number[]) => number[], maxSteps = 150, dMin = 0.02, dMax = 0.06,
): Promise<number> {
  const client = await EnvClient.connect(host, port);
  let successes = 0;
  for (let i = 0; i < n; i++) {
    const reset = await client.reset({
      seed: baseSeed + i,
      scenario: scenarioDict(suite, baseSeed + i),
      d_min: dMin,
      d_max: dMax,
      max_steps: maxSteps,
      start_theta: 0.0,
    });
    let obs = reset.obs;
    let done = false;
    while (!done) {
      const reply = await client.step(policy(obs));
      obs = reply.obs;
      done = reply.done;
      if (done && reply.reward.dist === 50) successes += 1;
    }
  }
  await client.close();
  return successes / n;
}

export function randomPolicy(seed: number): (obs: number[]) => number[] {
  const rng = new Rng(seed);
  return () => [rng.uniform(-ACTION_CAPS[0], ACTION_CAPS[0]),
                rng.uniform(-ACTION_CAPS[1], ACTION_CAPS[1]),
                rng.uniform(-ACTION_CAPS[2], ACTION_CAPS[2])];
}

export { ACTION_CAPS };
