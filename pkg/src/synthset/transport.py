"""Shared HTTP JSON transport with bounded exponential-backoff retries.

Transport failures (connection errors, timeouts, 429, 5xx) retry up to
max_attempts with delays base * factor**k; anything else in the 4xx range is
a permanent request error and is surfaced immediately.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import requests

from .errors import ProtocolError, RequestError, TransportError


@dataclass(frozen=True)
class RetryPolicy:
    base_seconds: float = 0.5
    factor: float = 2.0
    max_attempts: int = 5


class HttpJsonClient:
    """POST JSON, parse JSON, one requests.Session per thread."""

    def __init__(self, base_url: str, *, timeout: float = 30.0, retry: RetryPolicy | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retry = retry or RetryPolicy()
        self._local = threading.local()

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def post(self, path: str, body: dict) -> dict:
        url = self.base_url + path
        last_error: Exception | None = None
        for attempt in range(self.retry.max_attempts):
            if attempt > 0:
                time.sleep(self.retry.base_seconds * self.retry.factor ** (attempt - 1))
            try:
                resp = self._session().post(url, json=body, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = TransportError(f"{url} returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                try:
                    detail = resp.json().get("error", resp.text)
                except ValueError:
                    detail = resp.text
                raise RequestError(f"{url} rejected the request ({resp.status_code}): {detail}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned a non-JSON body") from exc
        raise TransportError(
            f"{url} unreachable after {self.retry.max_attempts} attempts: {last_error}"
        )
