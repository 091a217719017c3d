/** Command line entry points for the training harness.
 *
 *   node dist/src/main.js collect    --port P --n 10000 --seed 0 --out windows.bin
 *   node dist/src/main.js train-vae  --data windows.bin --out encoder.json [--epochs 10]
 *   node dist/src/main.js train-tqc  --port P --steps 24000 --out actor.json [--suite env_a]
 *   node dist/src/main.js serve-policy --checkpoint actor.json --agent-port Q
 *   node dist/src/main.js eval       --port P --checkpoint actor.json [--episodes 100]
 *
 * The environment server comes from the core package:
 *   planarpush serve --port P
 */

import { readFileSync } from "node:fs";

import { Actor, DEFAULT_TQC_CONFIG, TqcAgent, evaluatePolicy, randomPolicy,
         trainTqc } from "./tqc.js";
import { Vae } from "./vae.js";
import { collectWindows, loadDataset, saveDataset } from "./windows.js";
import { servePolicy } from "./evalRunner.js";

function arg(name: string, fallback?: string): string {
  const i = process.argv.indexOf(`--${name}`);
  if (i >= 0 && i + 1 < process.argv.length) return process.argv[i + 1];
  if (fallback !== undefined) return fallback;
  throw new Error(`missing --${name}`);
}

const log = (msg: string) => console.log(msg);

async function main(): Promise<void> {
  const cmd = process.argv[2];
  if (cmd === "collect") {
    const ds = await collectWindows("127.0.0.1", Number(arg("port")),
                                    Number(arg("n", "10000")), Number(arg("seed", "0")),
                                    log);
    saveDataset(ds, arg("out"));
    log(`wrote ${ds.n} windows (blank fraction ${ds.blankFraction.toFixed(3)}) to ${arg("out")}`);
  } else if (cmd === "train-vae") {
    const ds = loadDataset(arg("data"));
    const vae = new Vae({ epochs: Number(arg("epochs", "10")),
                          seed: Number(arg("seed", "0")) });
    const losses = vae.train(ds.data, ds.n, log);
    vae.quantizeToFloat32();
    vae.saveEncoder(arg("out"));
    log(`losses: ${losses.map((l) => l.toFixed(3)).join(" ")}`);
    log(`wrote encoder weight file to ${arg("out")}`);
  } else if (cmd === "train-tqc") {
    const agent = new TqcAgent({
      hidden: JSON.parse(arg("hidden", "[64,64]")),
      batchSize: Number(arg("batch", "128")),
      bufferCapacity: Number(arg("buffer", "100000")),
      seed: Number(arg("seed", "3")),
    });
    const result = await trainTqc(agent, "127.0.0.1", Number(arg("port")), {
      suite: arg("suite", "env_a"),
      totalSteps: Number(arg("steps", "24000")),
      warmupSteps: Number(arg("warmup", "1000")),
      updateEvery: Number(arg("update-every", "2")),
      maxEpisodeSteps: Number(arg("episode-steps", "120")),
      dMin: Number(arg("d-min", "0.02")),
      checkpointPath: arg("out"),
      checkpointEvery: 5000,
      log,
    });
    log(`trained: ${JSON.stringify(result)}; checkpoint at ${arg("out")}`);
  } else if (cmd === "serve-policy") {
    const agent = new TqcAgent({ hidden: JSON.parse(arg("hidden", "[64,64]")) });
    agent.actor.loadWeights(JSON.parse(readFileSync(arg("checkpoint"), "utf8")));
    servePolicy(agent.actor, Number(arg("agent-port")),
                (p) => log(`policy agent listening on 127.0.0.1:${p}`));
  } else if (cmd === "eval") {
    const episodes = Number(arg("episodes", "100"));
    const seed = Number(arg("seed", "6000"));
    const suite = arg("suite", "env_a");
    const steps = Number(arg("episode-steps", "80"));
    const port = Number(arg("port"));
    const rnd = await evaluatePolicy("127.0.0.1", port, suite, episodes, seed,
                                     randomPolicy(1), steps, 0.06, 0.06);
    log(`random policy success: ${rnd}`);
    const checkpoint = arg("checkpoint", "");
    if (checkpoint) {
      const agent = new TqcAgent({ hidden: JSON.parse(arg("hidden", "[64,64]")) });
      agent.actor.loadWeights(JSON.parse(readFileSync(checkpoint, "utf8")));
      const tr = await evaluatePolicy("127.0.0.1", port, suite, episodes, seed,
        (obs) => agent.actor.deterministic(Float64Array.from(obs)), steps, 0.06, 0.06);
      log(`trained policy success: ${tr} (x${(tr / Math.max(rnd, 1e-9)).toFixed(2)} vs random)`);
    }
  } else {
    console.error("usage: main.js collect|train-vae|train-tqc|serve-policy|eval ...");
    process.exitCode = 2;
  }
}

main().catch((e) => {
  console.error(e);
  process.exitCode = 1;
});
