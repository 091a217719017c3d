"""Command line entry points (scenario gen / plan / serve / bench / replay)."""

from __future__ import annotations

import argparse
import json
import sys

from . import bench as bench_mod
from .baseline import load_params
from .encoding import builtin_encoder, load_encoder
from .env import EpisodeConfig
from .perception import load_pgm
from .planning import plan_path
from .protocol import serve
from .world import (PUSHEE_SHAPES, ScenarioSpec, load_scenario, save_scenario,
                    scenario_suite)


def _cmd_scenario_gen(args) -> int:
    params = {}
    if args.gap is not None:
        params["gap"] = args.gap
    spec = ScenarioSpec(suite_id=args.suite, obstacle_params=params,
                        pushee_shape=PUSHEE_SHAPES[args.pushee], rng_seed=args.seed)
    save_scenario(spec, args.out)
    print(f"wrote {args.out}")
    return 0


def _parse_point(text: str):
    x, y = text.split(",")
    return float(x), float(y)


def _cmd_plan(args) -> int:
    grid = load_pgm(args.grid)
    path = plan_path(grid, _parse_point(args.start), _parse_point(args.goal))
    doc = {"waypoints": [[float(x), float(y)] for x, y in path.waypoints],
           "length": path.length}
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    print(f"wrote {args.out} ({len(path.waypoints)} waypoints, length {path.length:.6f})")
    return 0


def _cmd_serve(args) -> int:
    if args.scenario:
        spec = load_scenario(args.scenario)
    else:
        spec = scenario_suite("free_space")[0]
    encoder = load_encoder(args.encoder) if args.encoder else builtin_encoder()
    config = EpisodeConfig(scenario=spec, seed=args.seed)
    print(f"serving on {args.host}:{args.port}")
    serve(config, host=args.host, port=args.port, encoder=encoder, once=args.once)
    return 0


def _cmd_bench_run(args) -> int:
    baseline_params = load_params(args.baseline_params) if args.baseline_params else None
    records = bench_mod.run_suite(args.suite, args.policy, args.episodes, args.seed,
                                  d_min=args.d_min, d_max=args.d_max,
                                  max_steps=args.max_steps,
                                  baseline_params=baseline_params,
                                  pushee=args.pushee)
    table = bench_mod.aggregate_metrics(records)
    paths = bench_mod.export_results(records, table, args.out)
    print(f"{args.suite} / {args.policy}: success {table.success_rate:.3f} "
          f"contact {table.contact_rate_mean:.3f} collision {table.collision_rate_mean:.3f} "
          f"spl {table.spl:.3f} path {table.path_length_mean:.3f} "
          f"({table.n_episodes} episodes)")
    for name, p in paths.items():
        print(f"  {name}: {p}")
    return 0


def _load_episode_rows(results_dir: str) -> dict:
    import os

    rows = {}
    with open(os.path.join(results_dir, "episodes.csv")) as f:
        header = f.readline().strip().split(",")
        for line in f:
            parts = line.strip().split(",")
            row = dict(zip(header, parts))
            rows[int(row["seed"])] = row
    return rows


def _cmd_bench_compare(args) -> int:
    a = _load_episode_rows(args.a)
    b = _load_episode_rows(args.b)
    shared = sorted(set(a) & set(b))
    if len(shared) < 2:
        print("need at least two shared (scenario, seed) pairs", file=sys.stderr)
        return 2
    solved = [s for s in shared if a[s]["success"] == "1" and b[s]["success"] == "1"]
    print(f"paired episodes: {len(shared)}, solved by both: {len(solved)}")
    for metric in ("contact_rate", "collision_rate", "object_path_length"):
        va = [float(a[s][metric]) for s in solved]
        vb = [float(b[s][metric]) for s in solved]
        if len(va) < 2:
            print(f"{metric}: not enough jointly solved episodes")
            continue
        r = bench_mod.paired_t_test(va, vb, alpha=args.alpha)
        flag = "degenerate" if r.degenerate else ("significant" if r.significant
                                                  else "not significant")
        print(f"{metric}: mean_a {sum(va) / len(va):.4f} mean_b {sum(vb) / len(vb):.4f} "
              f"t {r.t:.4f} p {r.p_value:.4g} -> {flag}")
    sa = [float(a[s]["success"]) for s in shared]
    sb = [float(b[s]["success"]) for s in shared]
    print(f"success_rate: a {sum(sa) / len(sa):.4f} b {sum(sb) / len(sb):.4f}")
    return 0


def _cmd_replay(args) -> int:
    entries = bench_mod.load_traces(args.trace)
    if args.episode is not None:
        entries = [e for e in entries if e["episode"] == args.episode]
    records = []
    mismatches = 0
    for entry in entries:
        record = bench_mod.replay_trace_entry(entry)
        records.append(record)
        same = (record.actions == entry["actions"]
                and record.ee_trace == entry["ee_trace"]
                and record.object_trace == entry["object_trace"]
                and record.success == entry["success"])
        status = "ok" if same else "MISMATCH"
        mismatches += 0 if same else 1
        print(f"episode {entry['episode']} (seed {entry['seed']}): replay {status}")
    if args.out:
        table = bench_mod.aggregate_metrics(records)
        bench_mod.export_results(records, table, args.out)
        print(f"wrote replayed results to {args.out}")
    return 1 if mismatches else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planarpush")
    sub = parser.add_subparsers(dest="command", required=True)

    scenario = sub.add_parser("scenario", help="scenario file tools")
    scenario_sub = scenario.add_subparsers(dest="scenario_command", required=True)
    gen = scenario_sub.add_parser("gen", help="generate a scenario JSON file")
    gen.add_argument("--suite", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--pushee", default="small_cube", choices=sorted(PUSHEE_SHAPES))
    gen.add_argument("--gap", type=float, default=None)
    gen.set_defaults(func=_cmd_scenario_gen)

    plan = sub.add_parser("plan", help="plan a path on a PGM grid")
    plan.add_argument("--grid", required=True)
    plan.add_argument("--start", required=True, help="x,y (world meters)")
    plan.add_argument("--goal", required=True, help="x,y (world meters)")
    plan.add_argument("--out", required=True)
    plan.set_defaults(func=_cmd_plan)

    srv = sub.add_parser("serve", help="serve environments over TCP")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--scenario", default=None)
    srv.add_argument("--encoder", default=None)
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--once", action="store_true",
                     help="handle a single connection, then exit")
    srv.set_defaults(func=_cmd_serve)

    bench = sub.add_parser("bench", help="run and compare benchmark suites")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)
    run = bench_sub.add_parser("run")
    run.add_argument("--suite", required=True)
    run.add_argument("--policy", required=True,
                     help="baseline | noop | greedy | agent:HOST:PORT")
    run.add_argument("--episodes", type=int, default=100)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--out", required=True)
    run.add_argument("--d-min", type=float, default=0.2)
    run.add_argument("--d-max", type=float, default=0.6)
    run.add_argument("--max-steps", type=int, default=500)
    run.add_argument("--baseline-params", default=None)
    run.add_argument("--pushee", default="small_cube", choices=sorted(PUSHEE_SHAPES))
    run.set_defaults(func=_cmd_bench_run)
    cmp_ = bench_sub.add_parser("compare")
    cmp_.add_argument("--a", required=True)
    cmp_.add_argument("--b", required=True)
    cmp_.add_argument("--alpha", type=float, default=0.05)
    cmp_.set_defaults(func=_cmd_bench_compare)

    rep = sub.add_parser("replay", help="re-execute a recorded trace")
    rep.add_argument("--trace", required=True)
    rep.add_argument("--episode", type=int, default=None)
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=_cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
