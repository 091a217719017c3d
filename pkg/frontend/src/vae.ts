/**
 * Convolutional VAE over 64x64 egocentric windows.
 *
 * Encoder: four 3x3 conv layers, each followed by batch norm and relu, with
 * max pooling after the first and average pooling after the third, then a
 * 32-dim normal head (mean and log-variance). Decoder: a dense projection
 * and six deconvolution layers (zero-stuffing upsample + conv, which is an
 * exact stride-2 transposed convolution) with a Bernoulli logits output.
 * Inference uses the posterior mean, matching the core's deterministic
 * encoder contract; the encoder exports to the core weight-file format with
 * batch norm folded into the conv kernels.
 */

import { writeFileSync } from "node:fs";

import { Adam, AvgPool2, BatchNorm2D, Conv3x3, Dense, MaxPool2, Param, Relu, Rng,
         ZeroUpsample2, zeroGrads, toFloat32 } from "./nn.js";

export interface VaeConfig {
  latentDim: number;
  encChannels: [number, number, number, number];
  decChannels: [number, number, number, number, number, number];
  batchSize: number;
  epochs: number;
  lr: number;
  seed: number;
  klWeight: number;
}

export const DEFAULT_VAE_CONFIG: VaeConfig = {
  latentDim: 32,
  encChannels: [3, 4, 4, 6],
  decChannels: [8, 6, 5, 4, 3, 1],
  batchSize: 256,
  epochs: 10,
  lr: 1e-3,
  seed: 0,
  klWeight: 1.0,
};

interface EncoderStage {
  conv: Conv3x3;
  bn: BatchNorm2D;
  relu: Relu;
}

interface DecoderStage {
  up: ZeroUpsample2 | null;
  conv: Conv3x3;
  bn: BatchNorm2D | null;
  relu: Relu | null;
}

export class Vae {
  cfg: VaeConfig;
  rng: Rng;
  enc: EncoderStage[];
  maxPool = new MaxPool2();
  avgPool = new AvgPool2();
  denseMu: Dense;
  denseLogvar: Dense;
  decDense: Dense;
  dec: DecoderStage[];
  private flatDim: number;
  private decBase: number;

  constructor(cfg: Partial<VaeConfig> = {}) {
    this.cfg = { ...DEFAULT_VAE_CONFIG, ...cfg };
    const [c1, c2, c3, c4] = this.cfg.encChannels;
    this.rng = new Rng(this.cfg.seed + 1013);
    this.enc = [
      { conv: new Conv3x3(1, c1, this.rng), bn: new BatchNorm2D(c1), relu: new Relu() },
      { conv: new Conv3x3(c1, c2, this.rng), bn: new BatchNorm2D(c2), relu: new Relu() },
      { conv: new Conv3x3(c2, c3, this.rng), bn: new BatchNorm2D(c3), relu: new Relu() },
      { conv: new Conv3x3(c3, c4, this.rng), bn: new BatchNorm2D(c4), relu: new Relu() },
    ];
    this.flatDim = 16 * 16 * c4;
    this.denseMu = new Dense(this.flatDim, this.cfg.latentDim, this.rng, 0.01);
    this.denseLogvar = new Dense(this.flatDim, this.cfg.latentDim, this.rng, 0.01);

    const [d0, d1, d2, d3, d4, d5] = this.cfg.decChannels;
    this.decBase = d0;
    this.decDense = new Dense(this.cfg.latentDim, 4 * 4 * d0, this.rng, 0.05);
    const mk = (up: boolean, ci: number, co: number, last = false): DecoderStage => ({
      up: up ? new ZeroUpsample2() : null,
      conv: new Conv3x3(ci, co, this.rng),
      bn: last ? null : new BatchNorm2D(co),
      relu: last ? null : new Relu(),
    });
    // sizes: 4 -> 8 -> 8 -> 16 -> 32 -> 64 -> 64
    this.dec = [
      mk(true, d0, d1),
      mk(false, d1, d2),
      mk(true, d2, d3),
      mk(true, d3, d4),
      mk(true, d4, d5),
      mk(false, d5, 1, true),
    ];
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const s of this.enc) out.push(...s.conv.params(), ...s.bn.params());
    out.push(...this.denseMu.params(), ...this.denseLogvar.params(),
             ...this.decDense.params());
    for (const s of this.dec) {
      out.push(...s.conv.params());
      if (s.bn) out.push(...s.bn.params());
    }
    return out;
  }

  /** Encoder forward to (mu, logvar); caches for backward when training. */
  encode(x: Float64Array, B: number, train: boolean): { mu: Float64Array; logvar: Float64Array } {
    let h = x;
    let H = 64;
    let W = 64;
    const chans = [1, ...this.cfg.encChannels];
    for (let i = 0; i < 4; i++) {
      const s = this.enc[i];
      h = s.conv.forward(h, B, H, W);
      h = s.bn.forward(h, train);
      h = s.relu.forward(h);
      if (i === 0) {
        h = this.maxPool.forward(h, B, H, W, chans[1]);
        H >>= 1;
        W >>= 1;
      } else if (i === 2) {
        h = this.avgPool.forward(h, B, H, W, chans[3]);
        H >>= 1;
        W >>= 1;
      }
    }
    const mu = this.denseMu.forward(h, B);
    const logvar = this.denseLogvar.forward(h, B);
    for (let i = 0; i < logvar.length; i++) {
      logvar[i] = Math.max(-8, Math.min(8, logvar[i]));
    }
    return { mu, logvar };
  }

  private encoderBackward(gMu: Float64Array, gLogvar: Float64Array): void {
    let g = this.denseMu.backward(gMu);
    const g2 = this.denseLogvar.backward(gLogvar);
    for (let i = 0; i < g.length; i++) g[i] += g2[i];
    for (let i = 3; i >= 0; i--) {
      const s = this.enc[i];
      if (i === 2) g = this.avgPool.backward(g);
      if (i === 0) g = this.maxPool.backward(g);
      g = s.relu.backward(g);
      g = s.bn.backward(g);
      g = s.conv.backward(g);
    }
  }

  decode(z: Float64Array, B: number, train: boolean): Float64Array {
    let h = this.decDense.forward(z, B);
    let H = 4;
    let W = 4;
    let C = this.decBase;
    const chans = this.cfg.decChannels;
    for (let i = 0; i < 6; i++) {
      const s = this.dec[i];
      if (s.up) {
        h = s.up.forward(h, B, H, W, C);
        H *= 2;
        W *= 2;
      }
      h = s.conv.forward(h, B, H, W);
      C = i < 5 ? chans[i + 1] : 1;
      if (s.bn) h = s.bn.forward(h, train);
      if (s.relu) h = s.relu.forward(h);
    }
    return h; // logits, 64x64x1
  }

  private decoderBackward(g: Float64Array): Float64Array {
    for (let i = 5; i >= 0; i--) {
      const s = this.dec[i];
      if (s.relu) g = s.relu.backward(g);
      if (s.bn) g = s.bn.backward(g);
      g = s.conv.backward(g);
      if (s.up) g = s.up.backward(g);
    }
    return this.decDense.backward(g);
  }

  /** One training step; returns the batch loss (BCE + KL, mean per image). */
  trainStep(batch: Float64Array, B: number, opt: Adam): number {
    const params = this.params();
    zeroGrads(params);
    const { mu, logvar } = this.encode(batch, B, true);
    const L = this.cfg.latentDim;
    const eps = new Float64Array(B * L);
    const z = new Float64Array(B * L);
    for (let i = 0; i < z.length; i++) {
      eps[i] = this.rng.normal();
      z[i] = mu[i] + Math.exp(0.5 * logvar[i]) * eps[i];
    }
    const logits = this.decode(z, B, true);

    // Bernoulli negative log likelihood, summed per image, averaged over batch
    let bce = 0;
    const gLogits = new Float64Array(logits.length);
    for (let i = 0; i < logits.length; i++) {
      const t = batch[i];
      const l = logits[i];
      // stable log(1 + e^l) - t*l
      bce += Math.max(l, 0) - t * l + Math.log(1 + Math.exp(-Math.abs(l)));
      gLogits[i] = (1 / (1 + Math.exp(-l)) - t) / B;
    }
    bce /= B;

    let kl = 0;
    const gMu = new Float64Array(mu.length);
    const gLogvar = new Float64Array(logvar.length);
    for (let i = 0; i < mu.length; i++) {
      kl += -0.5 * (1 + logvar[i] - mu[i] * mu[i] - Math.exp(logvar[i]));
    }
    kl /= B;
    const kw = this.cfg.klWeight;

    const gz = this.decoderBackward(gLogits);
    for (let i = 0; i < mu.length; i++) {
      gMu[i] = gz[i] + (kw * mu[i]) / B;
      gLogvar[i] = gz[i] * 0.5 * (z[i] - mu[i]) + (kw * 0.5 * (Math.exp(logvar[i]) - 1)) / B;
    }
    this.encoderBackward(gMu, gLogvar);
    opt.step(params);
    return bce + kw * kl;
  }

  /** Full training; returns per-epoch mean losses. */
  train(dataset: Float32Array, n: number, log?: (msg: string) => void): number[] {
    const { batchSize, epochs, lr } = this.cfg;
    const opt = new Adam(lr);
    const order = Array.from({ length: n }, (_, i) => i);
    const losses: number[] = [];
    const pix = 64 * 64;
    for (let ep = 0; ep < epochs; ep++) {
      // deterministic shuffle
      for (let i = n - 1; i > 0; i--) {
        const j = this.rng.int(i + 1);
        [order[i], order[j]] = [order[j], order[i]];
      }
      let total = 0;
      let batches = 0;
      for (let off = 0; off + batchSize <= n; off += batchSize) {
        const batch = new Float64Array(batchSize * pix);
        for (let b = 0; b < batchSize; b++) {
          const src = order[off + b] * pix;
          for (let p = 0; p < pix; p++) batch[b * pix + p] = dataset[src + p];
        }
        total += this.trainStep(batch, batchSize, opt);
        batches += 1;
      }
      losses.push(total / batches);
      log?.(`epoch ${ep + 1}/${epochs}: loss ${losses[ep].toFixed(4)}`);
    }
    return losses;
  }

  /** Deterministic latent (posterior mean) for one window, inference mode. */
  latent(window: Float64Array): Float64Array {
    const { mu } = this.encode(window, 1, false);
    return mu;
  }

  /** Round all parameters to float32 (done before export and comparison). */
  quantizeToFloat32(): void {
    for (const p of this.params()) {
      for (let i = 0; i < p.value.length; i++) p.value[i] = Math.fround(p.value[i]);
    }
    for (const s of this.enc) {
      for (let i = 0; i < s.bn.C; i++) {
        s.bn.runningMean[i] = Math.fround(s.bn.runningMean[i]);
        s.bn.runningVar[i] = Math.fround(s.bn.runningVar[i]);
      }
    }
  }

  /** Core weight-file document; batch norm folded into the conv kernels. */
  exportEncoder(): Record<string, unknown> {
    const layers: Record<string, unknown>[] = [];
    const chans = [1, ...this.cfg.encChannels];
    for (let i = 0; i < 4; i++) {
      const s = this.enc[i];
      const ci = chans[i];
      const co = chans[i + 1];
      const scale = new Float64Array(co);
      const shift = new Float64Array(co);
      for (let c = 0; c < co; c++) {
        scale[c] = s.bn.gamma.value[c] / Math.sqrt(s.bn.runningVar[c] + s.bn.eps);
        shift[c] = s.bn.beta.value[c] - s.bn.runningMean[c] * scale[c];
      }
      const w = new Float64Array(9 * ci * co);
      const b = new Float64Array(co);
      for (let k = 0; k < 9 * ci; k++)
        for (let c = 0; c < co; c++) w[k * co + c] = Math.fround(s.conv.w.value[k * co + c] * scale[c]);
      for (let c = 0; c < co; c++)
        b[c] = Math.fround(s.conv.b.value[c] * scale[c] + shift[c]);
      layers.push({
        type: "conv2d", in_channels: ci, out_channels: co, kernel: [3, 3],
        stride: [1, 1], padding: [1, 1, 1, 1], weights: Array.from(w),
        bias: Array.from(b), activation: "relu",
      });
      if (i === 0) layers.push({ type: "maxpool2d", size: [2, 2], stride: [2, 2] });
      if (i === 2) layers.push({ type: "avgpool2d", size: [2, 2], stride: [2, 2] });
    }
    layers.push({ type: "flatten" });
    layers.push({
      type: "dense", in: this.flatDim, out: this.cfg.latentDim,
      weights: toFloat32(this.denseMu.w.value), bias: toFloat32(this.denseMu.b.value),
      activation: "identity",
    });
    return { format_version: 1, input: [64, 64, 1], layers };
  }

  /** Latent computed exactly as the exported (folded, float32) network would. */
  exportedLatent(window: Float64Array): Float64Array {
    const doc = this.exportEncoder() as { layers: any[] };
    let h = window;
    let H = 64;
    let W = 64;
    let C = 1;
    let out: Float64Array = new Float64Array(0);
    for (const layer of doc.layers) {
      if (layer.type === "conv2d") {
        const co = layer.out_channels;
        const conv = new Conv3x3(C, co, new Rng(1));
        conv.w.value.set(layer.weights);
        conv.b.value.set(layer.bias);
        h = conv.forward(h, 1, H, W);
        for (let i = 0; i < h.length; i++) if (h[i] < 0) h[i] = 0;
        C = co;
      } else if (layer.type === "maxpool2d") {
        h = new MaxPool2().forward(h, 1, H, W, C);
        H >>= 1;
        W >>= 1;
      } else if (layer.type === "avgpool2d") {
        h = new AvgPool2().forward(h, 1, H, W, C);
        H >>= 1;
        W >>= 1;
      } else if (layer.type === "flatten") {
        // already flat row-major
      } else if (layer.type === "dense") {
        const dense = new Dense(layer.in, layer.out, new Rng(1));
        dense.w.value.set(layer.weights);
        dense.b.value.set(layer.bias);
        out = dense.forward(h, 1);
      }
    }
    return out;
  }

  saveEncoder(path: string): void {
    writeFileSync(path, JSON.stringify(this.exportEncoder()));
  }
}
