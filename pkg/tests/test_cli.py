import json
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from planarpush.cli import main
from planarpush.perception import OccupancyGrid, save_pgm
from planarpush.protocol import EnvClient
from planarpush.world import load_scenario


def test_scenario_gen_round_trip(tmp_path):
    out = tmp_path / "s.json"
    rc = main(["scenario", "gen", "--suite", "env_c", "--seed", "1",
               "--out", str(out), "--gap", "0.2"])
    assert rc == 0
    spec = load_scenario(out)
    assert spec.suite_id == "env_c"
    assert spec.rng_seed == 1
    assert spec.obstacle_params["gap"] == 0.2


def test_scenario_gen_precision(tmp_path):
    out = tmp_path / "s.json"
    main(["scenario", "gen", "--suite", "free_space", "--seed", "0",
          "--out", str(out), "--pushee", "fragment"])
    doc = json.loads(out.read_text())
    verts = doc["pushee_shape"]["vertices"]
    spec = load_scenario(out)
    assert tuple(map(tuple, verts)) == spec.pushee_shape.vertices


def test_plan_cli(tmp_path):
    cells = np.zeros((64, 64), dtype=bool)
    cells[:50, 32] = True
    grid = OccupancyGrid(cells=cells, resolution=1.0, origin=(0.0, 0.0))
    gpath = tmp_path / "g.pgm"
    save_pgm(grid, gpath)
    out = tmp_path / "path.json"
    rc = main(["plan", "--grid", str(gpath), "--start", "10.5,10.5",
               "--goal", "50.5,10.5", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["length"] >= 40.0
    assert len(doc["waypoints"]) >= 2


def test_bench_run_and_compare(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out, policy in ((out_a, "greedy"), (out_b, "noop")):
        rc = main(["bench", "run", "--suite", "free_space", "--policy", policy,
                   "--episodes", "3", "--seed", "5", "--out", str(out),
                   "--max-steps", "40"])
        assert rc == 0
        assert (out / "episodes.csv").exists()
        assert (out / "metrics.csv").exists()
        assert (out / "traces.json").exists()
    rc = main(["bench", "compare", "--a", str(out_a), "--b", str(out_b),
               "--alpha", "0.05"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "paired episodes: 3" in text


def test_replay_reproduces_byte_identical_outputs(tmp_path):
    out = tmp_path / "run"
    main(["bench", "run", "--suite", "free_space", "--policy", "greedy",
          "--episodes", "2", "--seed", "9", "--out", str(out), "--max-steps", "40"])
    replay_out = tmp_path / "replayed"
    rc = main(["replay", "--trace", str(out / "traces.json"), "--out", str(replay_out)])
    assert rc == 0
    for name in ("episodes.csv", "traces.json", "metrics.csv"):
        assert (out / name).read_bytes() == (replay_out / name).read_bytes()


def test_replay_single_episode(tmp_path, capsys):
    out = tmp_path / "run"
    main(["bench", "run", "--suite", "free_space", "--policy", "noop",
          "--episodes", "2", "--seed", "3", "--out", str(out), "--max-steps", "20"])
    rc = main(["replay", "--trace", str(out / "traces.json"), "--episode", "1"])
    assert rc == 0
    assert "episode 1" in capsys.readouterr().out


def _free_port():
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def test_serve_subprocess_round_trip(tmp_path):
    scenario = tmp_path / "s.json"
    main(["scenario", "gen", "--suite", "free_space", "--seed", "0",
          "--out", str(scenario)])
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "planarpush.cli", "serve", "--port", str(port),
         "--scenario", str(scenario), "--once"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        spec = None
        client = None
        for _ in range(150):
            # probe the full handshake: the subprocess needs import time and
            # early connects can be torn down while it boots
            try:
                client = EnvClient("127.0.0.1", port, timeout=5)
                spec = client.spec()
                break
            except (OSError, Exception):
                if client is not None:
                    client.sock.close()
                    client = None
                time.sleep(0.1)
        assert spec is not None and spec["obs_dim"] == 49
        resp = client.reset({"seed": 2})
        assert len(resp["obs"]) == 49
        client.close()
        proc.wait(timeout=20)
    finally:
        if proc.poll() is None:
            proc.kill()
