from __future__ import annotations

import logging
import time

import httpx

from .errors import ProviderFailure

logger = logging.getLogger(__name__)

RETRIABLE_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict,
    *,
    headers: dict[str, str],
    max_attempts: int = 3,
    backoff_s: float = 0.5,
) -> dict:
    """POST ``payload`` and return the decoded JSON body.

    Retries retriable failures with exponential backoff; anything else, or the
    final retriable failure, is raised as ProviderFailure.
    """
    for attempt in range(1, max_attempts + 1):
        try:
            resp = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            err = ProviderFailure(f"transport error calling {url}: {exc}", retriable=True)
        else:
            if resp.status_code < 300:
                try:
                    body = resp.json()
                except ValueError as exc:
                    raise ProviderFailure(f"malformed JSON from {url}: {exc}") from exc
                if not isinstance(body, dict):
                    raise ProviderFailure(f"unexpected body type from {url}")
                return body
            retriable = resp.status_code in RETRIABLE_STATUS
            err = ProviderFailure(
                f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}", retriable=retriable
            )
            if not retriable:
                raise err
        if attempt == max_attempts:
            raise err
        delay = backoff_s * 2 ** (attempt - 1)
        logger.warning("attempt %d/%d failed (%s); retrying in %.2fs", attempt, max_attempts, err, delay)
        time.sleep(delay)
    raise AssertionError("unreachable")
