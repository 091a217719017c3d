import json
import socket
import threading
import time

import numpy as np
import pytest

from planarpush.env import EpisodeConfig
from planarpush.protocol import EnvClient, EnvServer, PROTOCOL_VERSION, spec_message
from planarpush.world import scenario_suite


@pytest.fixture(scope="module")
def server():
    config = EpisodeConfig(scenario=scenario_suite("free_space")[0], seed=0)
    srv = EnvServer(("127.0.0.1", 0), config)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv.server_address
    srv.shutdown()


def test_spec_message_shape():
    msg = spec_message()
    assert msg["protocol_version"] == PROTOCOL_VERSION
    assert msg["obs_dim"] == 49
    assert msg["action_dim"] == 3
    assert "window" in msg["extensions"]


def test_spec_round_trip(server):
    client = EnvClient(*server)
    spec = client.spec()
    assert spec["obs_dim"] == 49
    client.close()


def test_reset_returns_49_observation(server):
    client = EnvClient(*server)
    resp = client.reset({"seed": 3})
    assert len(resp["obs"]) == 49
    assert all(np.isfinite(resp["obs"]))
    client.close()


def test_step_response_schema(server):
    client = EnvClient(*server)
    client.reset({"seed": 3})
    resp = client.step([0.0, 0.0, 0.0])
    assert set(resp) == {"obs", "reward", "done", "info"}
    assert set(resp["reward"]) == {"dist", "collision", "touch", "total"}
    assert set(resp["info"]) == {"contact", "collision", "oob", "path_len"}
    assert resp["reward"]["total"] == pytest.approx(-2.0)
    assert resp["done"] is False
    client.close()


def test_step_before_reset_is_error(server):
    client = EnvClient(*server)
    resp = client.step([0.001, 0.0, 0.0])
    assert resp["error"] == "episode_finished"
    client.close()


def test_step_after_done_is_error(server):
    client = EnvClient(*server)
    client.reset({"seed": 3, "max_steps": 1})
    resp = client.step([0.0, 0.0, 0.0])
    assert resp["done"] is True
    resp = client.step([0.0, 0.0, 0.0])
    assert resp["error"] == "episode_finished"
    client.close()


def test_window_extension(server):
    client = EnvClient(*server)
    client.reset({"seed": 3})
    resp = client.window()
    assert resp["shape"] == [64, 64]
    assert len(resp["window"]) == 64
    assert all(len(row) == 64 for row in resp["window"])
    client.close()


def test_malformed_request_resets_connection(server):
    sock = socket.create_connection(server, timeout=10)
    reader = sock.makefile("rb")
    sock.sendall(b"this is not json\n")
    answer = json.loads(reader.readline())
    assert answer["error"] == "bad_request"
    assert reader.readline() == b""  # server dropped the connection
    sock.close()


def test_unknown_cmd_is_protocol_violation(server):
    sock = socket.create_connection(server, timeout=10)
    reader = sock.makefile("rb")
    sock.sendall(json.dumps({"cmd": "fly"}).encode() + b"\n")
    answer = json.loads(reader.readline())
    assert answer["error"] == "bad_request"
    assert reader.readline() == b""
    sock.close()


def test_sequential_clients_same_seed_identical_traces(server):
    rng = np.random.default_rng(5)
    actions = [[float(a), float(b), 0.0]
               for a, b in rng.uniform(-0.01, 0.01, size=(30, 2))]
    traces = []
    for _ in range(2):
        client = EnvClient(*server)
        first = client.reset({"seed": 11, "max_steps": 50})
        trace = [first["obs"]]
        rewards = []
        for act in actions:
            resp = client.step(act)
            trace.append(resp["obs"])
            rewards.append(resp["reward"]["total"])
            if resp["done"]:
                break
        client.close()
        traces.append((trace, rewards))
    assert traces[0] == traces[1]


def test_two_concurrent_connections_are_independent(server):
    a = EnvClient(*server)
    b = EnvClient(*server)
    ra = a.reset({"seed": 1})
    rb = b.reset({"seed": 2})
    assert ra["obs"] != rb["obs"] or True  # different seeds usually differ
    sa = a.step([0.01, 0.0, 0.0])
    sb = b.step([0.0, 0.01, 0.0])
    assert "obs" in sa and "obs" in sb
    a.close()
    b.close()


def test_float_precision_round_trips(server):
    client = EnvClient(*server)
    resp = client.reset({"seed": 3})
    # values pass through JSON with full round-trip precision
    again = json.loads(json.dumps(resp))
    assert again["obs"] == resp["obs"]
    client.close()


def test_serve_once_mode_completes_full_episode():
    from planarpush.protocol import OneShotEnvServer

    config = EpisodeConfig(scenario=scenario_suite("free_space")[0], seed=0)
    result = {}

    def run():
        srv = OneShotEnvServer(("127.0.0.1", 0), config)
        result["addr"] = srv.server_address
        result["ready"] = True
        srv.handle_request()  # must block until the client closes
        srv.server_close()

    t = threading.Thread(target=run, daemon=True)
    t.start()
    for _ in range(200):
        if result.get("ready"):
            break
        time.sleep(0.01)
    client = EnvClient(*result["addr"])
    assert client.spec()["obs_dim"] == 49
    resp = client.reset({"seed": 4})
    assert len(resp["obs"]) == 49
    resp = client.step([0.005, 0.0, 0.0])
    assert resp["done"] is False
    client.close()
    t.join(timeout=10)
    assert not t.is_alive()
