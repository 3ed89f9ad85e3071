"""Shared plumbing for remote providers (chat completion, embeddings).

Network access is always explicit: a provider is constructed from
configuration naming an endpoint and a credential environment variable,
and failures raise; nothing silently falls back to an offline path.
"""

from __future__ import annotations

import os
from typing import Any, Callable


class ProviderUnavailableError(RuntimeError):
    """The remote provider could not produce a response."""


class AuthError(RuntimeError):
    """Credential missing or rejected; never retried."""


PostFn = Callable[[str, dict, dict, float], tuple[int, Any]]
"""(url, json_payload, headers, timeout_s) -> (status_code, parsed_body)."""


def requests_post(url: str, payload: dict, headers: dict, timeout_s: float) -> tuple[int, Any]:
    """Default transport; imported lazily so offline use never needs it."""
    import requests

    try:
        response = requests.post(url, json=payload, headers=headers, timeout=timeout_s)
    except requests.RequestException as exc:
        raise ProviderUnavailableError(f"request to {url} failed: {exc}") from exc
    try:
        body = response.json()
    except ValueError:
        body = response.text
    return response.status_code, body


def resolve_credential(credential_env: str | None) -> str | None:
    """Read the credential named by config; raise if named but unset."""
    if not credential_env:
        return None
    value = os.environ.get(credential_env)
    if not value:
        raise AuthError(f"credential environment variable {credential_env!r} is not set")
    return value
