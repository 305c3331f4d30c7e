"""Bounded, per-host-polite HTTP fetching.

One shared pool serves both result-page retrieval and link probing: a
thread pool caps in-flight requests globally, and a per-host reservation
clock enforces a minimum delay between hits on the same host.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from urllib.parse import urlparse

import requests


@dataclass
class FetchResult:
    url: str
    status: int | None = None
    body: bytes = b""
    final_url: str = ""
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.status is not None and 200 <= self.status < 400


class FetchPool:
    """Thread-pooled GET requests with per-host politeness.

    ``per_host_delay_s`` reserves time slots per host under a lock, so
    concurrent workers never hit one host faster than the configured
    delay. Redirect chains are followed up to ``max_redirects``; longer
    chains and loops surface as errors.
    """

    def __init__(
        self,
        max_workers: int = 8,
        per_host_delay_s: float = 0.5,
        timeout_s: float = 10.0,
        max_redirects: int = 5,
        max_body_bytes: int = 2_000_000,
        user_agent: str = "serpeval/0.1",
    ) -> None:
        self.max_workers = max(1, max_workers)
        self.per_host_delay_s = max(0.0, per_host_delay_s)
        self.timeout_s = timeout_s
        self.max_redirects = max_redirects
        self.max_body_bytes = max_body_bytes
        self.user_agent = user_agent
        self._executor = ThreadPoolExecutor(max_workers=self.max_workers)
        self._local = threading.local()
        self._host_lock = threading.Lock()
        self._next_slot: dict[str, float] = {}

    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            session.max_redirects = self.max_redirects
            session.headers["User-Agent"] = self.user_agent
            self._local.session = session
        return session

    def _wait_for_slot(self, url: str) -> None:
        if self.per_host_delay_s <= 0:
            return
        host = urlparse(url).hostname or ""
        with self._host_lock:
            now = time.monotonic()
            slot = max(now, self._next_slot.get(host, now))
            self._next_slot[host] = slot + self.per_host_delay_s
        delay = slot - time.monotonic()
        if delay > 0:
            time.sleep(delay)

    def fetch_once(self, url: str) -> FetchResult:
        """One throttled GET; all failure modes fold into the result."""
        self._wait_for_slot(url)
        try:
            response = self._session().get(
                url, timeout=self.timeout_s, stream=True, allow_redirects=True
            )
        except requests.TooManyRedirects:
            return FetchResult(url=url, error="redirect chain too long or looping")
        except requests.RequestException as exc:
            return FetchResult(url=url, error=f"{type(exc).__name__}: {exc}")
        try:
            chunks: list[bytes] = []
            size = 0
            for chunk in response.iter_content(chunk_size=65536):
                chunks.append(chunk)
                size += len(chunk)
                if size >= self.max_body_bytes:
                    break
            body = b"".join(chunks)
        except requests.RequestException as exc:
            return FetchResult(url=url, status=response.status_code,
                               error=f"{type(exc).__name__}: {exc}")
        finally:
            response.close()
        return FetchResult(
            url=url, status=response.status_code, body=body, final_url=response.url
        )

    def fetch_all(self, urls: list[str]) -> list[FetchResult]:
        """Fetch URLs in parallel, preserving input order in the output."""
        return list(self._executor.map(self.fetch_once, urls))

    def submit(self, url: str):
        return self._executor.submit(self.fetch_once, url)

    def close(self) -> None:
        self._executor.shutdown(wait=True)

    def __enter__(self) -> "FetchPool":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
