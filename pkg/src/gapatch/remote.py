"""HTTP client for a remote similarity oracle.

Wire protocol (JSON over HTTP):
  GET  /v1/health           -> {"status": "ok", "backend": "<name>"}
  POST /v1/similarity       body {"image_a": "<b64 PNG>", "image_b": "<b64 PNG>"}
                            -> {"similarity": <number in [-1, 1]>}
  POST /v1/similarity_batch body {"pairs": [{"image_a":..., "image_b":...}, ...]}
                            -> {"similarities": [<number>, ...]} (order kept)

Transport failures and HTTP 500 are retried with exponential backoff; 429 is
retried up to its own limit and then surfaced as budget-exceeded, since the
query budget is the attack's cost currency. An optional throttle keeps the
observed request rate under a commercial-API-style QPS cap.
"""

import base64
import io
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image as PILImage

from .errors import BudgetExceededError, ProtocolError, TransportError
from .oracle import SimilarityOracle


@dataclass(frozen=True)
class ThrottleConfig:
    max_qps: float | None = None
    max_transport_retries: int = 3
    max_rate_limit_retries: int = 5
    backoff_base: float = 0.2
    timeout: float = 30.0


def encode_image(image: np.ndarray) -> str:
    """112x112 float image in [0, 1] -> base64 of an 8-bit PNG."""
    arr = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(b64: str) -> np.ndarray:
    """Base64 PNG -> float image in [0, 1] (server-side helper)."""
    raw = base64.b64decode(b64, validate=True)
    img = PILImage.open(io.BytesIO(raw))
    return np.asarray(img, dtype=np.float64) / 255.0


def _check_score(value) -> float:
    if not isinstance(value, (int, float)) or not (-1.0 <= float(value) <= 1.0):
        raise ProtocolError(f"similarity out of contract: {value!r}")
    return float(value)


class RemoteOracle(SimilarityOracle):
    """SimilarityOracle speaking the wire protocol against a live endpoint."""

    def __init__(self, endpoint_url: str, throttle: ThrottleConfig = ThrottleConfig(),
                 session=None, sleep=time.sleep):
        super().__init__()
        self.endpoint = endpoint_url.rstrip("/")
        self.throttle = throttle
        self.session = session or requests.Session()
        self._sleep = sleep
        self._send_lock = threading.Lock()
        self._last_send = -np.inf
        self.health_check()

    def health_check(self) -> dict:
        body = self._request("GET", "/v1/health")
        if body.get("status") != "ok":
            raise ProtocolError(f"unhealthy endpoint: {body!r}")
        return body

    def _pace(self):
        if self.throttle.max_qps is None:
            return
        interval = 1.0 / self.throttle.max_qps
        with self._send_lock:
            wait = self._last_send + interval - time.monotonic()
            if wait > 0:
                self._sleep(wait)
            self._last_send = time.monotonic()

    def _request(self, method: str, path: str, json_body=None) -> dict:
        url = self.endpoint + path
        transport_tries = rate_limit_tries = 0
        while True:
            self._pace()
            try:
                resp = self.session.request(method, url, json=json_body,
                                            timeout=self.throttle.timeout)
            except requests.RequestException as exc:
                transport_tries += 1
                if transport_tries > self.throttle.max_transport_retries:
                    raise TransportError(f"{method} {url}: {exc}") from exc
                self._sleep(self.throttle.backoff_base * 2 ** (transport_tries - 1))
                continue
            if resp.status_code == 429:
                rate_limit_tries += 1
                if rate_limit_tries > self.throttle.max_rate_limit_retries:
                    raise BudgetExceededError(
                        f"rate limited {rate_limit_tries} times at {url}")
                self._sleep(self.throttle.backoff_base * 2 ** (rate_limit_tries - 1))
                continue
            if resp.status_code >= 500:
                transport_tries += 1
                if transport_tries > self.throttle.max_transport_retries:
                    raise TransportError(f"{method} {url}: HTTP {resp.status_code}")
                self._sleep(self.throttle.backoff_base * 2 ** (transport_tries - 1))
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"{method} {url}: HTTP {resp.status_code}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{method} {url}: non-JSON body") from exc

    def _score(self, image_a, image_b) -> float:
        body = self._request("POST", "/v1/similarity", {
            "image_a": encode_image(image_a),
            "image_b": encode_image(image_b),
        })
        if "similarity" not in body:
            raise ProtocolError(f"missing 'similarity' in {body!r}")
        return _check_score(body["similarity"])

    def similarity_batch(self, pairs) -> list[float]:
        pairs = list(pairs)
        body = self._request("POST", "/v1/similarity_batch", {
            "pairs": [{"image_a": encode_image(a), "image_b": encode_image(b)}
                      for a, b in pairs],
        })
        sims = body.get("similarities")
        if not isinstance(sims, list) or len(sims) != len(pairs):
            raise ProtocolError(f"bad batch response: {body!r}")
        scores = [_check_score(s) for s in sims]
        self.ledger.record(len(scores), self.phase)
        return scores


def remote_similarity_client(endpoint_url: str,
                             throttle: ThrottleConfig = ThrottleConfig()) -> RemoteOracle:
    """Construct a client; performs a health check up front."""
    return RemoteOracle(endpoint_url, throttle)
