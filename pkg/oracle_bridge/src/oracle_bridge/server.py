"""HTTP server speaking the similarity wire protocol.

  GET  /v1/health           -> {"status": "ok", "backend": "<name>"}
  POST /v1/similarity       {"image_a": b64 PNG, "image_b": b64 PNG}
                            -> {"similarity": s}
  POST /v1/similarity_batch {"pairs": [{"image_a":..., "image_b":...}, ...]}
                            -> {"similarities": [...]} in request order

Status codes: 400 malformed request or wrong image size, 422 undecodable
image, 429 over the configured QPS cap, 500 backend failure. Stateless apart
from a request counter and the rate-limiter clock.
"""

import argparse
import base64
import binascii
import io
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .embedder import IMAGE_SIZE, cosine, load_backend


class RequestError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def decode_image(b64: str) -> np.ndarray:
    """Base64 PNG -> float image in [0, 1]; 422 undecodable, 400 bad size."""
    if not isinstance(b64, str):
        raise RequestError(400, "image field must be a base64 string")
    try:
        raw = base64.b64decode(b64, validate=True)
        img = PILImage.open(io.BytesIO(raw))
        img.load()
    except (binascii.Error, UnidentifiedImageError, OSError, ValueError) as exc:
        raise RequestError(422, f"undecodable image: {exc}") from exc
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.shape[:2] != (IMAGE_SIZE, IMAGE_SIZE) or arr.ndim not in (2, 3):
        raise RequestError(400, f"expected {IMAGE_SIZE}x{IMAGE_SIZE} image, "
                                f"got shape {arr.shape}")
    return arr


class RateLimiter:
    """Minimum-interval limiter; over-rate requests get rejected, not queued."""

    def __init__(self, max_qps):
        self.interval = None if max_qps is None else 1.0 / float(max_qps)
        self._last = -float("inf")
        self._lock = threading.Lock()

    def admit(self) -> bool:
        if self.interval is None:
            return True
        with self._lock:
            now = time.monotonic()
            if now - self._last < self.interval:
                return False
            self._last = now
            return True


class BridgeServer:
    """Wraps ThreadingHTTPServer; port 0 picks a free port (tests)."""

    def __init__(self, backend, host: str = "127.0.0.1", port: int = 0,
                 max_qps=None):
        self.backend = backend
        self.limiter = RateLimiter(max_qps)
        self.requests_served = 0
        self.httpd = ThreadingHTTPServer((host, port), self._make_handler())
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def _score_pair(self, payload: dict) -> float:
        if not isinstance(payload, dict):
            raise RequestError(400, "pair must be an object")
        for key in ("image_a", "image_b"):
            if key not in payload:
                raise RequestError(400, f"missing field: {key}")
        a = decode_image(payload["image_a"])
        b = decode_image(payload["image_b"])
        try:
            return cosine(self.backend.embed(a), self.backend.embed(b))
        except RequestError:
            raise
        except Exception as exc:
            raise RequestError(500, f"backend failure: {exc}") from exc

    def handle(self, method: str, path: str, body: bytes):
        """(status, payload) for one request; transport-agnostic."""
        if method == "GET":
            if path == "/v1/health":
                return 200, {"status": "ok",
                             "backend": self.backend.descriptor.name}
            return 400, {"error": "unknown path"}
        if path not in ("/v1/similarity", "/v1/similarity_batch"):
            return 400, {"error": "unknown path"}
        if not self.limiter.admit():
            return 429, {"error": "rate limited"}
        self.requests_served += 1
        try:
            payload = json.loads(body)
        except json.JSONDecodeError:
            return 400, {"error": "body is not valid JSON"}
        try:
            if path == "/v1/similarity":
                return 200, {"similarity": self._score_pair(payload)}
            pairs = payload.get("pairs") if isinstance(payload, dict) else None
            if not isinstance(pairs, list):
                return 400, {"error": "missing field: pairs"}
            return 200, {"similarities": [self._score_pair(p) for p in pairs]}
        except RequestError as exc:
            return exc.status, {"error": str(exc)}

    def _make_handler(self):
        bridge = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _respond(self, status, payload):
                body = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                self._respond(*bridge.handle("GET", self.path, b""))

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                self._respond(*bridge.handle("POST", self.path, body))

        return Handler

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oracle-bridge", description=__doc__.splitlines()[0])
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--backend", default="toy",
                        help='"toy" or "adapter:<module-path>"')
    parser.add_argument("--max-qps", type=float, default=None, dest="max_qps",
                        help="server-side request rate cap (429 when exceeded)")
    args = parser.parse_args(argv)
    try:
        backend = load_backend(args.backend)
    except (ValueError, ImportError) as exc:
        parser.error(str(exc))
    server = BridgeServer(backend, host=args.host, port=args.port,
                          max_qps=args.max_qps)
    print(f"serving backend {backend.descriptor.name!r} on {server.url}")
    try:
        server.httpd.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
