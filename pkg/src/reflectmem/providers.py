"""Build providers from plain config dicts (as found in experiment config files)."""

from __future__ import annotations

from typing import Mapping

from .core import LLMConfig
from .embedding import DEFAULT_DIM, EmbeddingProvider, HashingEmbedder, RemoteEmbedder
from .errors import ConfigError
from .generation import EchoGenerator, GenerationProvider, HeuristicReflector, RemoteGenerator


def make_embedder(spec: Mapping | None) -> EmbeddingProvider:
    """``{"kind": "hashing", "dim": 256}`` or
    ``{"kind": "remote", "base_url": ..., "model": ..., "dim": ..., "timeout_s": ..., "batch_size": ..., "max_parallel": ...}``.
    """
    spec = dict(spec or {"kind": "hashing"})
    kind = spec.pop("kind", "hashing")
    try:
        if kind == "hashing":
            return HashingEmbedder(dim=int(spec.pop("dim", DEFAULT_DIM)))
        if kind == "remote":
            return RemoteEmbedder(spec.pop("base_url"), spec.pop("model"), int(spec.pop("dim")), **spec)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {kind} embedder config: {exc}") from exc
    raise ConfigError(f"unknown embedder kind {kind!r}")


def make_generator(spec: Mapping | None) -> GenerationProvider:
    """``{"kind": "heuristic"|"echo"}`` or
    ``{"kind": "remote", "base_url": ..., "model": ..., "temperature": 0, "top_p": 0.5, "timeout_s": ...}``.
    """
    spec = dict(spec or {"kind": "heuristic"})
    kind = spec.pop("kind", "heuristic")
    try:
        config = LLMConfig(
            temperature=float(spec.pop("temperature", 0.0)),
            top_p=float(spec.pop("top_p", 0.5)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        if kind == "heuristic":
            return HeuristicReflector(config)
        if kind == "echo":
            return EchoGenerator(config)
        if kind == "remote":
            return RemoteGenerator(spec.pop("base_url"), spec.pop("model"), config, **spec)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {kind} generator config: {exc}") from exc
    raise ConfigError(f"unknown generator kind {kind!r}")
