"""Small shared HTTP helper: JSON POST with bounded retries and typed errors."""

from __future__ import annotations

import time

import requests


class TransportError(RuntimeError):
    """Transport-level failure (network, timeout, 5xx) after all retry attempts.

    Retryable by the caller; `attempts` records how many tries were made.
    """

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


def post_json(
    url: str,
    payload: dict,
    headers: dict | None = None,
    timeout: float = 60.0,
    retries: int = 3,
    backoff_s: float = 0.5,
) -> dict:
    """POST `payload` as JSON and return the decoded JSON response.

    Retries on connection errors, timeouts, and 429/5xx responses with
    exponential backoff. Non-retryable HTTP errors (4xx other than 429)
    raise immediately as TransportError with attempts=1 semantics.
    """
    last_err: Exception | None = None
    for attempt in range(1, retries + 1):
        try:
            resp = requests.post(url, json=payload, headers=headers or {}, timeout=timeout)
        except requests.RequestException as exc:
            last_err = exc
        else:
            if resp.status_code < 400:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise TransportError(f"non-JSON response from {url}: {exc}", attempt) from exc
            if resp.status_code == 429 or resp.status_code >= 500:
                last_err = RuntimeError(f"HTTP {resp.status_code} from {url}")
            else:
                raise TransportError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}", attempt)
        if attempt < retries:
            time.sleep(backoff_s * (2 ** (attempt - 1)))
    raise TransportError(f"request to {url} failed after {retries} attempts: {last_err}", retries)
