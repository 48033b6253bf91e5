"""Wire protocol to an external simulation backend.

Newline-delimited JSON over a TCP byte stream: one request line out, one
response line back per simulation.  A loopback echo server backed by the
internal dynamics model ships for testing clients end to end.
"""

from __future__ import annotations

import dataclasses
import json
import socket
import socketserver
import threading

import numpy as np

from .simulator import ScenarioConfig, SimulationTrace, VehicleParams, simulate

PROTOCOL_VERSION = 1

_REQUIRED_RESPONSE_FIELDS = (
    "samples",
    "collided",
    "collision_speed",
    "min_distance",
    "completed",
)
_SAMPLE_FIELDS = (
    "t",
    "ego_position",
    "ego_speed",
    "ego_accel",
    "obstacle_distance",
    "relative_speed",
    "brake_command",
    "throttle_command",
)


class TransportError(RuntimeError):
    """Endpoint unreachable or the connection broke mid-exchange."""


class ProtocolError(RuntimeError):
    """Malformed message; the offending field is named in the text."""


class IntegrityError(RuntimeError):
    """Decoded trace violates a SimulationTrace invariant."""


def parse_endpoint(endpoint: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(endpoint, tuple):
        return endpoint
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


def encode_request(params: VehicleParams, scenario: ScenarioConfig) -> dict:
    return {
        "version": PROTOCOL_VERSION,
        "scenario": dataclasses.asdict(scenario),
        "params": dataclasses.asdict(params),
    }


def decode_response(obj: dict, time_step: float) -> SimulationTrace:
    """Turn a response message into a SimulationTrace, checking invariants."""
    if not isinstance(obj, dict):
        raise ProtocolError("response is not a JSON object")
    for field in _REQUIRED_RESPONSE_FIELDS:
        if field not in obj:
            raise ProtocolError(f"response missing required field {field!r}")
    samples = obj["samples"]
    if not isinstance(samples, list):
        raise ProtocolError("field 'samples' is not a list")
    columns: dict[str, list] = {f: [] for f in _SAMPLE_FIELDS}
    for i, sample in enumerate(samples):
        if not isinstance(sample, dict):
            raise ProtocolError(f"samples[{i}] is not an object")
        for field in _SAMPLE_FIELDS:
            if field not in sample:
                raise ProtocolError(f"samples[{i}] missing field {field!r}")
            columns[field].append(sample[field])

    # Infinity does not survive strict JSON; the sentinel travels as null.
    gaps = [
        float("inf") if g is None else float(g)
        for g in columns["obstacle_distance"]
    ]
    trace = SimulationTrace(
        t=np.asarray(columns["t"], dtype=np.float64),
        ego_position=np.asarray(columns["ego_position"], dtype=np.float64),
        ego_speed=np.asarray(columns["ego_speed"], dtype=np.float64),
        ego_accel=np.asarray(columns["ego_accel"], dtype=np.float64),
        obstacle_distance=np.asarray(gaps, dtype=np.float64),
        relative_speed=np.asarray(columns["relative_speed"], dtype=np.float64),
        brake_command=np.asarray(columns["brake_command"], dtype=np.bool_),
        throttle_command=np.asarray(columns["throttle_command"], dtype=np.bool_),
        collided=bool(obj["collided"]),
        collision_speed=float(obj["collision_speed"]),
        min_distance=float(obj["min_distance"]),
        completed=bool(obj["completed"]),
        time_step=time_step,
    )

    if trace.collided != (trace.min_distance <= 0):
        raise IntegrityError(
            "collided flag inconsistent with min_distance "
            f"({trace.collided} vs {trace.min_distance})"
        )
    if trace.collision_speed < 0:
        raise IntegrityError("collision_speed must be nonnegative")
    if trace.collision_speed > 0 and not trace.collided:
        raise IntegrityError("collision_speed > 0 without a collision")
    if np.any(trace.brake_command & trace.throttle_command):
        raise IntegrityError("brake and throttle commanded at the same sample")
    if len(trace.t) > 1:
        steps = np.diff(trace.t)
        if np.any(steps <= 0) or np.any(np.abs(steps - time_step) > 1e-9):
            raise IntegrityError("sample times not spaced by the time step")
    return trace


def encode_trace(trace: SimulationTrace) -> dict:
    samples = []
    for s in trace.samples:
        row = dataclasses.asdict(s)
        if row["obstacle_distance"] == float("inf"):
            row["obstacle_distance"] = None
        samples.append(row)
    return {
        "version": PROTOCOL_VERSION,
        "samples": samples,
        "collided": trace.collided,
        "collision_speed": trace.collision_speed,
        "min_distance": trace.min_distance,
        "completed": trace.completed,
    }


def run_external(
    endpoint: str | tuple[str, int],
    params: VehicleParams,
    scenario: ScenarioConfig,
    timeout: float = 30.0,
) -> SimulationTrace:
    """One request/response exchange with an external simulator."""
    host, port = parse_endpoint(endpoint)
    request = json.dumps(encode_request(params, scenario)) + "\n"
    try:
        with socket.create_connection((host, port), timeout=timeout) as conn:
            conn.sendall(request.encode())
            raw = b""
            while not raw.endswith(b"\n"):
                chunk = conn.recv(65536)
                if not chunk:
                    break
                raw += chunk
    except OSError as exc:
        raise TransportError(f"cannot reach {host}:{port}: {exc}") from exc
    if not raw:
        raise TransportError(f"connection to {host}:{port} closed without response")
    try:
        obj = json.loads(raw.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"response is not valid JSON: {exc}") from exc
    return decode_response(obj, scenario.time_step)


class _EchoHandler(socketserver.StreamRequestHandler):
    def handle(self):
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line.decode())
                scenario = ScenarioConfig(**request["scenario"])
                params = VehicleParams(**request["params"])
                trace = simulate(params, scenario)
                response = encode_trace(trace)
            except Exception as exc:  # report instead of dropping the link
                response = {"version": PROTOCOL_VERSION, "error": str(exc)}
            self.wfile.write((json.dumps(response) + "\n").encode())
            self.wfile.flush()


class BridgeEchoServer(socketserver.ThreadingTCPServer):
    """Loopback test server: answers bridge requests with the internal model."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _EchoHandler)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def serve_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
