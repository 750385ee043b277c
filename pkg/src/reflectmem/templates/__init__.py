"""Prompt templates, stored verbatim as ``*.txt`` files beside this module."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

NAMES = (
    "summary_extraction",
    "web_reflection_extraction",
    "one_shot_injection",
    "summary_injection",
    "web_reflection_injection",
)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown template {name!r}")
    return resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
