"""Generation backend that forwards prefixes to an HTTP completion endpoint.

Wire schema (JSON over POST):
    request  {"prefix": str, "stop": [str], "max_tokens": int, "temperature": float, "seed": int}
    response {"completion": str}

The completion is returned untouched except that it is cut right after the
first stop sequence it contains, in case the server ignores ``stop``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

import httpx

from retmem.controller import STOP_SEQUENCES
from retmem.errors import BackendUnavailable


class RemoteBackendError(BackendUnavailable):
    pass


class Timeout(RemoteBackendError):
    pass


class TransportError(RemoteBackendError):
    pass


class NonTextResponse(RemoteBackendError):
    pass


@dataclass(frozen=True)
class RemoteBackendConfig:
    endpoint: str
    timeout: float = 30.0
    token_env: Optional[str] = "RETMEM_TOKEN"
    max_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


def cut_at_stop(text: str, stop: Sequence[str]) -> str:
    hits = [(i + len(s)) for s in stop if s and (i := text.find(s)) >= 0]
    return text[: min(hits)] if hits else text


class RemoteBackend:
    def __init__(self, config: RemoteBackendConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)

    def _headers(self) -> dict[str, str]:
        token = os.environ.get(self.config.token_env) if self.config.token_env else None
        return {"Authorization": f"Bearer {token}"} if token else {}

    def generate(self, prefix: str, stop: Sequence[str] = STOP_SEQUENCES) -> str:
        cfg = self.config
        payload = {
            "prefix": prefix,
            "stop": list(stop),
            "max_tokens": cfg.max_tokens,
            "temperature": cfg.temperature,
            "seed": cfg.seed,
        }
        try:
            resp = self._client.post(cfg.endpoint, json=payload, headers=self._headers())
            resp.raise_for_status()
        except httpx.TimeoutException as exc:
            raise Timeout(f"{cfg.endpoint}: timed out after {cfg.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"{cfg.endpoint}: {exc}") from exc
        try:
            completion = resp.json()["completion"]
        except (ValueError, KeyError, TypeError) as exc:
            raise NonTextResponse(f"{cfg.endpoint}: response has no completion text") from exc
        if not isinstance(completion, str):
            raise NonTextResponse(f"{cfg.endpoint}: completion is {type(completion).__name__}, not text")
        return cut_at_stop(completion, stop)

    def close(self) -> None:
        self._client.close()
