/**
 * Minimal deterministic neural-network engine (typed arrays, NHWC).
 *
 * tfjs cannot train convolutions on this host (no native backend, and the
 * wasm backend lacks conv gradients), so the layers needed by the encoder
 * and the agent are implemented directly: conv3x3 (stride 1, same padding),
 * zero-stuffing upsample (which turns the following conv into an exact
 * stride-2 transposed convolution), max/avg 2x2 pooling, batch norm and
 * dense layers, all with hand-written backward passes and Adam.
 *
 * Everything is Float64 internally; weights are rounded to float32 at
 * export time so the core-side evaluator reproduces latents bit-closely.
 */

export class Rng {
  private s: number;
  private spare: number | null = null;

  constructor(seed: number) {
    this.s = seed >>> 0 || 0x9e3779b9;
  }

  next(): number {
    // mulberry32
    this.s = (this.s + 0x6d2b79f5) >>> 0;
    let t = this.s;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  uniform(lo = 0, hi = 1): number {
    return lo + (hi - lo) * this.next();
  }

  normal(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    while (u <= 1e-12) {
      u = this.next();
      v = this.next();
    }
    const r = Math.sqrt(-2 * Math.log(u));
    this.spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  }

  int(n: number): number {
    return Math.min(n - 1, Math.floor(this.next() * n));
  }

  /** Sample k distinct integers from [0, n) (Floyd's algorithm, sorted). */
  sampleWithoutReplacement(n: number, k: number): number[] {
    const chosen = new Set<number>();
    for (let j = n - k; j < n; j++) {
      const t = this.int(j + 1);
      chosen.add(chosen.has(t) ? j : t);
    }
    return [...chosen].sort((a, b) => a - b);
  }
}

export interface Param {
  value: Float64Array;
  grad: Float64Array;
}

export class Adam {
  private m = new Map<Param, Float64Array>();
  private v = new Map<Param, Float64Array>();
  private t = 0;

  constructor(public lr = 1e-3, public beta1 = 0.9, public beta2 = 0.999,
              public eps = 1e-8) {}

  step(params: Param[]): void {
    this.t += 1;
    const b1t = 1 - Math.pow(this.beta1, this.t);
    const b2t = 1 - Math.pow(this.beta2, this.t);
    for (const p of params) {
      let m = this.m.get(p);
      let v = this.v.get(p);
      if (!m) {
        m = new Float64Array(p.value.length);
        v = new Float64Array(p.value.length);
        this.m.set(p, m);
        this.v.set(p, v!);
      }
      const vv = this.v.get(p)!;
      for (let i = 0; i < p.value.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * p.grad[i];
        vv[i] = this.beta2 * vv[i] + (1 - this.beta2) * p.grad[i] * p.grad[i];
        p.value[i] -= (this.lr * (m[i] / b1t)) / (Math.sqrt(vv[i] / b2t) + this.eps);
      }
    }
  }
}

export function zeroGrads(params: Param[]): void {
  for (const p of params) p.grad.fill(0);
}

/** 3x3 convolution, stride 1, same padding; kernel layout [kh][kw][ci][co]. */
export class Conv3x3 {
  w: Param;
  b: Param;
  private x: Float64Array | null = null;
  private H = 0;
  private W = 0;
  private B = 0;

  constructor(public inC: number, public outC: number, rng: Rng) {
    const fanIn = 9 * inC;
    const scale = Math.sqrt(2 / fanIn);
    const w = new Float64Array(9 * inC * outC);
    for (let i = 0; i < w.length; i++) w[i] = rng.normal() * scale;
    this.w = { value: w, grad: new Float64Array(w.length) };
    this.b = { value: new Float64Array(outC), grad: new Float64Array(outC) };
  }

  params(): Param[] {
    return [this.w, this.b];
  }

  forward(x: Float64Array, B: number, H: number, W: number): Float64Array {
    const { inC, outC } = this;
    const out = new Float64Array(B * H * W * outC);
    const w = this.w.value;
    const b = this.b.value;
    for (let n = 0; n < B; n++) {
      const xoff = n * H * W * inC;
      const ooff = n * H * W * outC;
      for (let ky = 0; ky < 3; ky++) {
        for (let kx = 0; kx < 3; kx++) {
          const oy0 = Math.max(0, 1 - ky);
          const oy1 = Math.min(H, H + 1 - ky);
          const ox0 = Math.max(0, 1 - kx);
          const ox1 = Math.min(W, W + 1 - kx);
          const wbase0 = (ky * 3 + kx) * inC * outC;
          for (let oy = oy0; oy < oy1; oy++) {
            const iy = oy + ky - 1;
            for (let ox = ox0; ox < ox1; ox++) {
              const ix = ox + kx - 1;
              const ibase = xoff + (iy * W + ix) * inC;
              const obase = ooff + (oy * W + ox) * outC;
              for (let ci = 0; ci < inC; ci++) {
                const xv = x[ibase + ci];
                if (xv === 0) continue;
                const wrow = wbase0 + ci * outC;
                for (let co = 0; co < outC; co++) out[obase + co] += xv * w[wrow + co];
              }
            }
          }
        }
      }
      for (let i = 0; i < H * W; i++) {
        const obase = ooff + i * outC;
        for (let co = 0; co < outC; co++) out[obase + co] += b[co];
      }
    }
    this.x = x;
    this.B = B;
    this.H = H;
    this.W = W;
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const { inC, outC, H, W, B } = this;
    const x = this.x!;
    const dx = new Float64Array(x.length);
    const w = this.w.value;
    const gw = this.w.grad;
    const gb = this.b.grad;
    for (let n = 0; n < B; n++) {
      const xoff = n * H * W * inC;
      const ooff = n * H * W * outC;
      for (let i = 0; i < H * W; i++) {
        const obase = ooff + i * outC;
        for (let co = 0; co < outC; co++) gb[co] += g[obase + co];
      }
      for (let ky = 0; ky < 3; ky++) {
        for (let kx = 0; kx < 3; kx++) {
          const oy0 = Math.max(0, 1 - ky);
          const oy1 = Math.min(H, H + 1 - ky);
          const ox0 = Math.max(0, 1 - kx);
          const ox1 = Math.min(W, W + 1 - kx);
          const wbase0 = (ky * 3 + kx) * inC * outC;
          for (let oy = oy0; oy < oy1; oy++) {
            const iy = oy + ky - 1;
            for (let ox = ox0; ox < ox1; ox++) {
              const ix = ox + kx - 1;
              const ibase = xoff + (iy * W + ix) * inC;
              const obase = ooff + (oy * W + ox) * outC;
              for (let ci = 0; ci < inC; ci++) {
                const xv = x[ibase + ci];
                const wrow = wbase0 + ci * outC;
                let acc = 0;
                for (let co = 0; co < outC; co++) {
                  const gv = g[obase + co];
                  gw[wrow + co] += xv * gv;
                  acc += w[wrow + co] * gv;
                }
                dx[ibase + ci] += acc;
              }
            }
          }
        }
      }
    }
    return dx;
  }
}

export class Relu {
  private mask: Uint8Array | null = null;

  forward(x: Float64Array): Float64Array {
    const out = new Float64Array(x.length);
    const mask = new Uint8Array(x.length);
    for (let i = 0; i < x.length; i++) {
      if (x[i] > 0) {
        out[i] = x[i];
        mask[i] = 1;
      }
    }
    this.mask = mask;
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const mask = this.mask!;
    const dx = new Float64Array(g.length);
    for (let i = 0; i < g.length; i++) if (mask[i]) dx[i] = g[i];
    return dx;
  }
}

export class BatchNorm2D {
  gamma: Param;
  beta: Param;
  runningMean: Float64Array;
  runningVar: Float64Array;
  momentum = 0.1;
  eps = 1e-5;
  private xhat: Float64Array | null = null;
  private std: Float64Array | null = null;
  private count = 0;

  constructor(public C: number) {
    this.gamma = { value: new Float64Array(C).fill(1), grad: new Float64Array(C) };
    this.beta = { value: new Float64Array(C), grad: new Float64Array(C) };
    this.runningMean = new Float64Array(C);
    this.runningVar = new Float64Array(C).fill(1);
  }

  params(): Param[] {
    return [this.gamma, this.beta];
  }

  forward(x: Float64Array, train: boolean): Float64Array {
    const C = this.C;
    const n = x.length / C;
    const out = new Float64Array(x.length);
    if (!train) {
      for (let c = 0; c < C; c++) {
        const scale = this.gamma.value[c] / Math.sqrt(this.runningVar[c] + this.eps);
        const shift = this.beta.value[c] - this.runningMean[c] * scale;
        for (let i = 0; i < n; i++) out[i * C + c] = x[i * C + c] * scale + shift;
      }
      return out;
    }
    const mean = new Float64Array(C);
    const varr = new Float64Array(C);
    for (let i = 0; i < n; i++)
      for (let c = 0; c < C; c++) mean[c] += x[i * C + c];
    for (let c = 0; c < C; c++) mean[c] /= n;
    for (let i = 0; i < n; i++)
      for (let c = 0; c < C; c++) {
        const d = x[i * C + c] - mean[c];
        varr[c] += d * d;
      }
    for (let c = 0; c < C; c++) varr[c] /= n;
    const xhat = new Float64Array(x.length);
    const std = new Float64Array(C);
    for (let c = 0; c < C; c++) std[c] = Math.sqrt(varr[c] + this.eps);
    for (let i = 0; i < n; i++)
      for (let c = 0; c < C; c++) {
        const h = (x[i * C + c] - mean[c]) / std[c];
        xhat[i * C + c] = h;
        out[i * C + c] = this.gamma.value[c] * h + this.beta.value[c];
      }
    for (let c = 0; c < C; c++) {
      this.runningMean[c] = (1 - this.momentum) * this.runningMean[c] + this.momentum * mean[c];
      this.runningVar[c] = (1 - this.momentum) * this.runningVar[c] + this.momentum * varr[c];
    }
    this.xhat = xhat;
    this.std = std;
    this.count = n;
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const C = this.C;
    const n = this.count;
    const xhat = this.xhat!;
    const std = this.std!;
    const dx = new Float64Array(g.length);
    for (let c = 0; c < C; c++) {
      let sumG = 0;
      let sumGX = 0;
      for (let i = 0; i < n; i++) {
        const gv = g[i * C + c];
        sumG += gv;
        sumGX += gv * xhat[i * C + c];
      }
      this.beta.grad[c] += sumG;
      this.gamma.grad[c] += sumGX;
      const k = this.gamma.value[c] / (std[c] * n);
      for (let i = 0; i < n; i++) {
        dx[i * C + c] = k * (n * g[i * C + c] - sumG - xhat[i * C + c] * sumGX);
      }
    }
    return dx;
  }
}

export class MaxPool2 {
  private argmax: Int32Array | null = null;
  private inLen = 0;

  forward(x: Float64Array, B: number, H: number, W: number, C: number): Float64Array {
    const oh = H >> 1;
    const ow = W >> 1;
    const out = new Float64Array(B * oh * ow * C);
    const argmax = new Int32Array(out.length);
    for (let n = 0; n < B; n++) {
      for (let oy = 0; oy < oh; oy++) {
        for (let ox = 0; ox < ow; ox++) {
          for (let c = 0; c < C; c++) {
            let best = -Infinity;
            let bestIdx = -1;
            for (let dy = 0; dy < 2; dy++) {
              for (let dx = 0; dx < 2; dx++) {
                const idx = ((n * H + oy * 2 + dy) * W + ox * 2 + dx) * C + c;
                if (x[idx] > best) {
                  best = x[idx];
                  bestIdx = idx;
                }
              }
            }
            const o = ((n * oh + oy) * ow + ox) * C + c;
            out[o] = best;
            argmax[o] = bestIdx;
          }
        }
      }
    }
    this.argmax = argmax;
    this.inLen = x.length;
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const dx = new Float64Array(this.inLen);
    const argmax = this.argmax!;
    for (let i = 0; i < g.length; i++) dx[argmax[i]] += g[i];
    return dx;
  }
}

export class AvgPool2 {
  private dims: [number, number, number, number] = [0, 0, 0, 0];

  forward(x: Float64Array, B: number, H: number, W: number, C: number): Float64Array {
    const oh = H >> 1;
    const ow = W >> 1;
    const out = new Float64Array(B * oh * ow * C);
    for (let n = 0; n < B; n++)
      for (let oy = 0; oy < oh; oy++)
        for (let ox = 0; ox < ow; ox++)
          for (let c = 0; c < C; c++) {
            let s = 0;
            for (let dy = 0; dy < 2; dy++)
              for (let dx = 0; dx < 2; dx++)
                s += x[((n * H + oy * 2 + dy) * W + ox * 2 + dx) * C + c];
            out[((n * oh + oy) * ow + ox) * C + c] = s / 4;
          }
    this.dims = [B, H, W, C];
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const [B, H, W, C] = this.dims;
    const oh = H >> 1;
    const ow = W >> 1;
    const dx = new Float64Array(B * H * W * C);
    for (let n = 0; n < B; n++)
      for (let oy = 0; oy < oh; oy++)
        for (let ox = 0; ox < ow; ox++)
          for (let c = 0; c < C; c++) {
            const gv = g[((n * oh + oy) * ow + ox) * C + c] / 4;
            for (let dy = 0; dy < 2; dy++)
              for (let dx2 = 0; dx2 < 2; dx2++)
                dx[((n * H + oy * 2 + dy) * W + ox * 2 + dx2) * C + c] = gv;
          }
    return dx;
  }
}

/** Zero-stuffing x2 upsample: conv after this equals a stride-2 deconvolution. */
export class ZeroUpsample2 {
  private dims: [number, number, number, number] = [0, 0, 0, 0];

  forward(x: Float64Array, B: number, H: number, W: number, C: number): Float64Array {
    const out = new Float64Array(B * 4 * H * W * C);
    const oh = H * 2;
    const ow = W * 2;
    for (let n = 0; n < B; n++)
      for (let y = 0; y < H; y++)
        for (let xw = 0; xw < W; xw++)
          for (let c = 0; c < C; c++)
            out[((n * oh + y * 2) * ow + xw * 2) * C + c] =
              x[((n * H + y) * W + xw) * C + c];
    this.dims = [B, H, W, C];
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const [B, H, W, C] = this.dims;
    const oh = H * 2;
    const ow = W * 2;
    const dx = new Float64Array(B * H * W * C);
    for (let n = 0; n < B; n++)
      for (let y = 0; y < H; y++)
        for (let xw = 0; xw < W; xw++)
          for (let c = 0; c < C; c++)
            dx[((n * H + y) * W + xw) * C + c] =
              g[((n * oh + y * 2) * ow + xw * 2) * C + c];
    return dx;
  }
}

export class Dense {
  w: Param; // [in][out] row-major
  b: Param;
  private x: Float64Array | null = null;
  private B = 0;

  constructor(public inN: number, public outN: number, rng: Rng, scale?: number) {
    const s = scale ?? Math.sqrt(2 / inN);
    const w = new Float64Array(inN * outN);
    for (let i = 0; i < w.length; i++) w[i] = rng.normal() * s;
    this.w = { value: w, grad: new Float64Array(w.length) };
    this.b = { value: new Float64Array(outN), grad: new Float64Array(outN) };
  }

  params(): Param[] {
    return [this.w, this.b];
  }

  forward(x: Float64Array, B: number): Float64Array {
    const { inN, outN } = this;
    const out = new Float64Array(B * outN);
    const w = this.w.value;
    const b = this.b.value;
    for (let n = 0; n < B; n++) {
      const xoff = n * inN;
      const ooff = n * outN;
      for (let o = 0; o < outN; o++) out[ooff + o] = b[o];
      for (let i = 0; i < inN; i++) {
        const xv = x[xoff + i];
        if (xv === 0) continue;
        const wrow = i * outN;
        for (let o = 0; o < outN; o++) out[ooff + o] += xv * w[wrow + o];
      }
    }
    this.x = x;
    this.B = B;
    return out;
  }

  backward(g: Float64Array): Float64Array {
    const { inN, outN, B } = this;
    const x = this.x!;
    const dx = new Float64Array(B * inN);
    const w = this.w.value;
    const gw = this.w.grad;
    const gb = this.b.grad;
    for (let n = 0; n < B; n++) {
      const xoff = n * inN;
      const ooff = n * outN;
      for (let o = 0; o < outN; o++) gb[o] += g[ooff + o];
      for (let i = 0; i < inN; i++) {
        const xv = x[xoff + i];
        const wrow = i * outN;
        let acc = 0;
        for (let o = 0; o < outN; o++) {
          const gv = g[ooff + o];
          gw[wrow + o] += xv * gv;
          acc += w[wrow + o] * gv;
        }
        dx[xoff + i] = acc;
      }
    }
    return dx;
  }
}

export function toFloat32(a: Float64Array): number[] {
  return Array.from(a, (v) => Math.fround(v));
}
