"""Newline-delimited JSON wire protocol exposing environments over TCP.

One connection owns one environment instance. Requests:

    {"cmd": "spec"}
    {"cmd": "reset", "config": {...}}      config fields override the server default
    {"cmd": "step", "action": [dx, dy, dtheta]}
    {"cmd": "window"}                      extension: current 64x64 local window
    {"cmd": "close"}

Step responses carry {"obs", "reward": {dist, collision, touch, total},
"done", "info": {contact, collision, oob, path_len}}. Semantic errors (for
example stepping a finished episode) answer {"error": ...} and keep the
connection; malformed requests answer an error and drop the connection.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading

from .dynamics import ActionDelta, DXY_MAX, DTHETA_MAX
from .encoding import EncoderSpec
from .env import EpisodeConfig, PushEnv, episode_config_from_dict, episode_config_to_dict
from .errors import EpisodeFinished, PolicyTimeout, ProtocolError, ResetFailed
from .replay import ACTION_DIM, OBS_DIM

PROTOCOL_VERSION = 1


def spec_message() -> dict:
    return {
        "protocol_version": PROTOCOL_VERSION,
        "obs_dim": OBS_DIM,
        "action_dim": ACTION_DIM,
        "action_caps": [DXY_MAX, DXY_MAX, DTHETA_MAX],
        "extensions": ["window"],
    }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: EnvServer = self.server  # type: ignore[assignment]
        env = PushEnv(encoder=server.encoder)
        while True:
            line = self.rfile.readline()
            if not line:
                return
            try:
                msg = json.loads(line)
                cmd = msg.get("cmd")
            except (json.JSONDecodeError, AttributeError):
                self._send({"error": "bad_request", "detail": "not a JSON object"})
                return  # protocol violation: reset the connection
            try:
                if cmd == "spec":
                    self._send(spec_message())
                elif cmd == "reset":
                    merged = episode_config_to_dict(server.default_config)
                    merged.update(msg.get("config") or {})
                    obs = env.reset(episode_config_from_dict(merged))
                    self._send({"obs": list(obs)})
                elif cmd == "step":
                    action = msg.get("action")
                    if not isinstance(action, list) or len(action) != ACTION_DIM:
                        self._send({"error": "bad_request",
                                    "detail": f"action must be a list of {ACTION_DIM}"})
                        return
                    obs, reward, done, info = env.step(ActionDelta(*map(float, action)))
                    self._send({
                        "obs": list(obs),
                        "reward": {"dist": reward.r_dist, "collision": reward.r_collision,
                                   "touch": reward.r_touch, "total": reward.r_total},
                        "done": done,
                        "info": {"contact": info["contact"], "collision": info["collision"],
                                 "oob": info["oob"], "path_len": info["path_len"]},
                    })
                elif cmd == "window":
                    win = env.local_window()
                    self._send({"shape": list(win.values.shape),
                                "window": [list(map(float, row)) for row in win.values]})
                elif cmd == "close":
                    self._send({"ok": True})
                    return
                else:
                    self._send({"error": "bad_request", "detail": f"unknown cmd {cmd!r}"})
                    return
            except EpisodeFinished:
                self._send({"error": "episode_finished"})
            except ResetFailed as e:
                self._send({"error": "reset_failed", "detail": str(e)})
            except Exception as e:  # keep the server alive; report and drop
                self._send({"error": "internal", "detail": str(e)})
                return

    def _send(self, payload: dict) -> None:
        self.wfile.write(json.dumps(payload).encode() + b"\n")


class EnvServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, default_config: EpisodeConfig,
                 encoder: EncoderSpec | None = None):
        super().__init__(address, _Handler)
        self.default_config = default_config
        self.encoder = encoder


class OneShotEnvServer(socketserver.TCPServer):
    """Synchronous variant: handle_request blocks until the client is done."""

    allow_reuse_address = True

    def __init__(self, address, default_config: EpisodeConfig,
                 encoder: EncoderSpec | None = None):
        super().__init__(address, _Handler)
        self.default_config = default_config
        self.encoder = encoder


def serve(default_config: EpisodeConfig, host: str = "127.0.0.1", port: int = 5555,
          encoder: EncoderSpec | None = None, once: bool = False,
          ready_event: threading.Event | None = None) -> None:
    """Serve environments until interrupted (`once` handles a single connection)."""
    server_cls = OneShotEnvServer if once else EnvServer
    with server_cls((host, port), default_config, encoder) as server:
        if ready_event is not None:
            server.bound_port = server.server_address[1]
            ready_event.set()
        if once:
            server.handle_request()
        else:
            server.serve_forever()


class EnvClient:
    """Blocking client for the environment protocol."""

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.reader = self.sock.makefile("rb")

    def request(self, payload: dict) -> dict:
        self.sock.sendall(json.dumps(payload).encode() + b"\n")
        line = self.reader.readline()
        if not line:
            raise ProtocolError("connection closed by server")
        return json.loads(line)

    def spec(self) -> dict:
        return self.request({"cmd": "spec"})

    def reset(self, config: dict | None = None) -> dict:
        return self.request({"cmd": "reset", "config": config or {}})

    def step(self, action) -> dict:
        return self.request({"cmd": "step", "action": list(map(float, action))})

    def window(self) -> dict:
        return self.request({"cmd": "window"})

    def close(self) -> None:
        try:
            self.request({"cmd": "close"})
        except (OSError, ProtocolError):
            pass
        self.sock.close()


class PolicyAgentClient:
    """Client for external policy agents driven by the benchmark runner.

    The agent listens on a socket and answers newline JSON messages
    {"cmd": "reset"|"act", "obs": [...]} with {"action": [dx, dy, dtheta]}.
    """

    def __init__(self, host: str, port: int, deadline: float = 10.0):
        self.deadline = deadline
        self.sock = socket.create_connection((host, port), timeout=deadline)
        self.reader = self.sock.makefile("rb")

    def _ask(self, payload: dict):
        self.sock.sendall(json.dumps(payload).encode() + b"\n")
        try:
            line = self.reader.readline()
        except socket.timeout as e:
            raise PolicyTimeout(f"agent unresponsive for {self.deadline}s") from e
        if not line:
            raise ProtocolError("agent closed the connection")
        msg = json.loads(line)
        action = msg.get("action")
        if not isinstance(action, list) or len(action) != ACTION_DIM:
            raise ProtocolError(f"agent answered without a {ACTION_DIM}-value action")
        return ActionDelta(*map(float, action))

    def reset(self, obs) -> ActionDelta:
        return self._ask({"cmd": "reset", "obs": list(map(float, obs))})

    def act(self, obs) -> ActionDelta:
        return self._ask({"cmd": "act", "obs": list(map(float, obs))})

    def close(self) -> None:
        self.sock.close()
