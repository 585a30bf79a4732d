"""Generic JSON-over-HTTP backend.

Request body::

    {"model": ..., "capability": ..., "prompt": ..., "params": {...},
     "attachments": [{"ref": ..., "media_type": ..., "data_b64": ...}]}

Response body: ``{"text": ..., "blob_b64": ..., "name": ..., "media_type": ...}``
(field names configurable). Vendor-specific shapes are handled by a proxy or
by overriding :meth:`HttpBackend.build_body` / :meth:`HttpBackend.parse_body`.
"""

from __future__ import annotations

import base64
import logging
import os
import threading
import time
from dataclasses import dataclass, field

import httpx

from ..errors import ConfigError, ServiceError, TransportError
from .base import BackendResponse, Capability, CapabilityRequest

log = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({408, 425, 429, 500, 502, 503, 504})


@dataclass
class EndpointConfig:
    endpoint: str
    model: str = ""
    timeout_s: float = 120.0
    retries: int = 3
    backoff_s: float = 1.0
    backoff_factor: float = 2.0
    max_in_flight: int = 4
    api_key_env: str | None = None
    text_field: str = "text"
    blob_field: str = "blob_b64"

    def __post_init__(self):
        if self.retries < 0:
            raise ConfigError("retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be > 0")


@dataclass
class HttpBackend:
    """POSTs each request to the endpoint configured for its capability.

    A request is attempted at most ``1 + retries`` times. Timeouts, connection
    errors and 408/425/429/5xx responses are retried with exponential backoff;
    other non-success statuses fail immediately with :class:`ServiceError`.
    """

    endpoints: dict[Capability, EndpointConfig]
    client: httpx.Client | None = None
    sleep: callable = time.sleep
    _sems: dict[Capability, threading.BoundedSemaphore] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self._sems = {cap: threading.BoundedSemaphore(cfg.max_in_flight) for cap, cfg in self.endpoints.items()}
        if self.client is None:
            self.client = httpx.Client()

    def close(self):
        self.client.close()

    def build_body(self, request: CapabilityRequest, cfg: EndpointConfig) -> dict:
        return {
            "model": cfg.model,
            "capability": request.capability.value,
            "prompt": request.prompt,
            "params": dict(request.params),
            "attachments": [
                {"ref": a.ref, "media_type": a.media_type, "data_b64": base64.b64encode(a.data).decode()}
                for a in request.attachments
            ],
        }

    def parse_body(self, body: dict, cfg: EndpointConfig) -> BackendResponse:
        blob = body.get(cfg.blob_field)
        return BackendResponse(
            text=body.get(cfg.text_field) or "",
            blob=base64.b64decode(blob) if blob else None,
            name=body.get("name"),
            media_type=body.get("media_type", "application/octet-stream"),
        )

    def _headers(self, cfg: EndpointConfig) -> dict[str, str]:
        if not cfg.api_key_env:
            return {}
        key = os.environ.get(cfg.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {cfg.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}"}

    def invoke(self, request: CapabilityRequest) -> BackendResponse:
        cfg = self.endpoints.get(request.capability)
        if cfg is None:
            raise ConfigError(f"no endpoint configured for capability {request.capability.value}")
        body = self.build_body(request, cfg)
        headers = self._headers(cfg)
        attempts = 0
        delay = cfg.backoff_s
        last: Exception | None = None
        with self._sems[request.capability]:
            while attempts <= cfg.retries:
                if attempts:
                    self.sleep(delay)
                    delay *= cfg.backoff_factor
                attempts += 1
                try:
                    resp = self.client.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout_s)
                except httpx.TimeoutException as exc:
                    last = exc
                    log.warning("%s timeout (attempt %d)", cfg.endpoint, attempts)
                    continue
                except httpx.TransportError as exc:
                    last = exc
                    log.warning("%s connection error (attempt %d): %s", cfg.endpoint, attempts, exc)
                    continue
                if resp.status_code in RETRYABLE_STATUS:
                    last = ServiceError(resp.status_code, resp.text, attempts)
                    log.warning("%s returned %d (attempt %d)", cfg.endpoint, resp.status_code, attempts)
                    continue
                if not resp.is_success:
                    raise ServiceError(resp.status_code, resp.text, attempts)
                try:
                    return self.parse_body(resp.json(), cfg)
                except ValueError as exc:
                    raise ServiceError(resp.status_code, f"invalid JSON body: {exc}", attempts) from exc
        raise TransportError(
            f"{request.capability.value} request to {cfg.endpoint} failed after {attempts} attempts "
            f"({cfg.retries} retries): {last}",
            attempts=attempts,
        )
