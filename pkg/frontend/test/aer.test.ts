import { readFileSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { ReplayBuffer, cosineSimilarity, selectAttentive } from "../src/aer.js";
import { Rng } from "../src/nn.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const fixture = JSON.parse(
  readFileSync(path.join(here, "..", "..", "tests", "fixtures", "aer_conformance.json"),
               "utf8"),
);

describe("cosine similarity conformance", () => {
  it("matches the core library on the shared vectors", () => {
    for (const c of fixture.cosine_cases) {
      const a = Float64Array.from(c.a as number[]);
      const b = Float64Array.from(c.b as number[]);
      expect(Math.abs(cosineSimilarity(a, b) - c.expected)).toBeLessThan(1e-12);
    }
  });
});

describe("attentive selection conformance", () => {
  it("reproduces the core ranking on explicit pre-samples", () => {
    for (const c of fixture.selection_cases) {
      const buf = new ReplayBuffer(c.obs_matrix.length, 49);
      for (const row of c.obs_matrix) {
        const obs = Float32Array.from(row as number[]);
        buf.push({ obs, action: new Float32Array(3), reward: 0, nextObs: obs, done: false });
      }
      const got = selectAttentive((i) => buf.obsAt(i), c.presample, c.query, c.bs);
      expect(got).toEqual(c.expected);
    }
  });
});

describe("ring buffer", () => {
  it("overwrites FIFO once full", () => {
    const buf = new ReplayBuffer(2, 4);
    for (const r of [1, 2, 3]) {
      const obs = Float32Array.from([r, 0, 0, 0]);
      buf.push({ obs, action: new Float32Array(3), reward: r, nextObs: obs, done: false });
    }
    expect(buf.count).toBe(2);
    const rewards = [buf.rewardAt(0), buf.rewardAt(1)].sort();
    expect(rewards).toEqual([2, 3]);
  });

  it("attentive batch is a subset of the pre-sample and similarity-monotone", () => {
    const rng = new Rng(9);
    const buf = new ReplayBuffer(100, 8);
    for (let i = 0; i < 100; i++) {
      const obs = Float32Array.from({ length: 8 }, () => rng.normal());
      buf.push({ obs, action: new Float32Array(3), reward: 0, nextObs: obs, done: false });
    }
    const query = Float64Array.from({ length: 8 }, () => rng.normal());
    const sel = buf.sampleAttentive(query, 8, 4, new Rng(4));
    expect(new Set(sel).size).toBe(8);
    const pre = new Rng(4).sampleWithoutReplacement(100, 32);
    for (const idx of sel) expect(pre).toContain(idx);
    const selSims = sel.map((i) => cosineSimilarity(buf.obsAt(i), query));
    const worstKept = Math.min(...selSims);
    const leftOut = pre.filter((i) => !sel.includes(i));
    for (const i of leftOut) {
      expect(cosineSimilarity(buf.obsAt(i), query)).toBeLessThanOrEqual(worstKept + 1e-12);
    }
  });
});
