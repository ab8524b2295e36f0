"""Per-image analysis over HTTP for online pipelines.

POST /detect takes image bytes (PNG, TIFF, or the raw float format selected
by Content-Type), runs the detector, and returns the blob set, radius
histogram, and per-stage timings as JSON. Query parameters override detector
settings per request; detectors are cached per parameter set (small LRU) so
kernel banks and FFT plans are built once. GET /healthz always answers
immediately, outside the detection worker pool.

Detection work is admitted through a bounded pool: up to `workers` requests
compute concurrently, up to `backlog` more wait, and anything beyond that is
rejected with 503 rather than buffered.
"""

from __future__ import annotations

import io
import json
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .detector import (
    DetectionParams,
    Detector,
    blobset_to_doc,
    histogram_to_doc,
)
from .images import raw_from_bytes

__all__ = ["ServiceConfig", "DetectorCache", "AnalysisServer", "make_server", "serve"]


def _parse_bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# query params accepted as per-request overrides, with parser and bounds check
_PARAM_SPECS = {
    "min_sigma": (float, lambda v: 0 < v <= 100),
    "max_sigma": (float, lambda v: 0 < v <= 100),
    "n_bin": (int, lambda v: 1 <= v <= 256),
    "truncate": (float, lambda v: 0 < v <= 10),
    "threshold": (float, lambda v: 0 <= v <= 1e6),
    "overlap": (float, lambda v: 0 <= v <= 1),
    "neighborhood": (int, lambda v: v >= 1 and v % 2 == 1),
    "backend": (str, lambda v: v in ("direct", "fft")),
    "preprocess": (_parse_bool, lambda v: True),
    "smooth_sigma": (float, lambda v: 0 <= v <= 50),
    "saturation": (float, lambda v: 0 <= v < 0.5),
    "prune": (_parse_bool, lambda v: True),
}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8750
    params: DetectionParams = DetectionParams()
    max_request_bytes: int = 16 * 1024 * 1024  # fits 16-bit 1000x1000 with headroom
    request_timeout_s: float = 120.0
    workers: int = 1
    backlog: int = 4
    detector_cache_size: int = 4


class DetectorCache:
    """LRU of Detectors keyed by parameter set, with single-flight builds."""

    def __init__(self, capacity: int = 4):
        self.capacity = capacity
        self._cache: OrderedDict[tuple, Detector] = OrderedDict()
        self._lock = threading.Lock()
        self._building: dict[tuple, threading.Event] = {}

    def get(self, params: DetectionParams) -> Detector:
        key = tuple(sorted(params.to_dict().items()))
        while True:
            with self._lock:
                det = self._cache.get(key)
                if det is not None:
                    self._cache.move_to_end(key)
                    return det
                pending = self._building.get(key)
                if pending is None:
                    event = threading.Event()
                    self._building[key] = event
                    break
            pending.wait()
        try:
            det = Detector(params)
        except Exception:
            with self._lock:
                self._building.pop(key).set()
            raise
        with self._lock:
            self._cache[key] = det
            while len(self._cache) > self.capacity:
                self._cache.popitem(last=False)
            self._building.pop(key).set()
        return det


class _State:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.cache = DetectorCache(config.detector_cache_size)
        self.started = time.monotonic()
        self.requests_served = 0
        self.counter_lock = threading.Lock()
        # admission: workers computing + backlog waiting; beyond that, 503
        self.admission = threading.BoundedSemaphore(config.workers + config.backlog)
        self.compute = threading.BoundedSemaphore(config.workers)


class _HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _decode_image(body: bytes, content_type: str) -> np.ndarray:
    ctype = (content_type or "").split(";")[0].strip().lower()
    try:
        if ctype == "application/octet-stream":
            return raw_from_bytes(body, label="request body")
        if ctype in ("image/png", "image/tiff", "image/tif", ""):
            import imageio.v3 as iio

            arr = iio.imread(io.BytesIO(body))
            if arr.ndim != 2:
                raise ValueError(f"multi-channel image (shape {arr.shape})")
            if arr.dtype == np.uint8:
                return arr.astype(np.float32) / 255.0
            if arr.dtype == np.uint16:
                return arr.astype(np.float32) / 65535.0
            raise ValueError(f"unsupported bit depth {arr.dtype}")
        raise ValueError(f"unsupported content type {ctype!r}")
    except _HttpError:
        raise
    except Exception as exc:
        raise _HttpError(400, f"cannot decode image: {exc}") from exc


def _apply_overrides(params: DetectionParams, query: dict) -> DetectionParams:
    updates = {}
    for name, values in query.items():
        if name in ("name",):
            continue
        spec = _PARAM_SPECS.get(name)
        if spec is None:
            raise _HttpError(400, f"unknown parameter {name!r}")
        parse, check = spec
        try:
            value = parse(values[-1])
        except ValueError as exc:
            raise _HttpError(400, f"bad value for {name!r}: {values[-1]!r}") from exc
        if not check(value):
            raise _HttpError(400, f"value out of bounds for {name!r}: {value!r}")
        updates[name] = value
    if not updates:
        return params
    merged = replace(params, **updates)
    if merged.max_sigma <= merged.min_sigma:
        raise _HttpError(400, "max_sigma must exceed min_sigma")
    return merged


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    state: _State  # injected by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, doc: dict) -> None:
        payload = json.dumps(doc, indent=2).encode() + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        if status >= 400:
            # the request body may be partly unread; do not reuse the socket
            self.send_header("Connection", "close")
            self.close_connection = True
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path in ("/healthz", "/health"):
            state = self.state
            with state.counter_lock:
                served = state.requests_served
            self._send_json(
                200,
                {
                    "status": "ok",
                    "params": state.config.params.to_dict(),
                    "uptime_s": time.monotonic() - state.started,
                    "requests_served": served,
                    "workers": state.config.workers,
                },
            )
            return
        self._send_json(404, {"error": f"no such path {url.path!r}"})

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/detect":
            self._send_json(404, {"error": f"no such path {url.path!r}"})
            return
        state = self.state
        try:
            length = int(self.headers.get("Content-Length", "0"))
            if length > state.config.max_request_bytes:
                raise _HttpError(
                    413, f"payload {length} exceeds limit {state.config.max_request_bytes}"
                )
            if length <= 0:
                raise _HttpError(400, "empty request body")
            if not state.admission.acquire(blocking=False):
                raise _HttpError(503, "detection queue full, retry later")
            try:
                body = self.rfile.read(length)
                query = parse_qs(url.query)
                params = _apply_overrides(state.config.params, query)
                name = query.get("name", ["request"])[-1]
                if not state.compute.acquire(timeout=state.config.request_timeout_s):
                    raise _HttpError(503, "timed out waiting for a worker")
                try:
                    # decode inside the worker slot: at most `workers` decoded
                    # frames in flight; backlog waiters hold raw bytes only
                    img = _decode_image(body, self.headers.get("Content-Type", ""))
                    detector = state.cache.get(params)
                    result = detector.run(img)
                finally:
                    state.compute.release()
            finally:
                state.admission.release()
            doc = blobset_to_doc(result.blobs, name)
            doc["histogram"] = histogram_to_doc(result.histogram)
            doc["timing_ms"] = {k: round(v, 3) for k, v in result.timings_ms.items()}
            with state.counter_lock:
                state.requests_served += 1
            self._send_json(200, doc)
        except _HttpError as err:
            self._send_json(err.status, {"error": err.message})
        except Exception as exc:  # defensive: never drop the connection silently
            self._send_json(500, {"error": f"internal error: {exc}"})


class AnalysisServer(ThreadingHTTPServer):
    daemon_threads = True


def make_server(config: ServiceConfig) -> AnalysisServer:
    """Build (but do not start) the HTTP server; call serve_forever() to run."""
    state = _State(config)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    server = AnalysisServer((config.host, config.port), handler)
    server.state = state
    return server


def serve(config: ServiceConfig) -> None:
    server = make_server(config)
    host, port = server.server_address[:2]
    print(f"dogblob service listening on {host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
