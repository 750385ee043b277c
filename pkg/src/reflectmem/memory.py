"""Knowledge memory: build, top-k cosine retrieval, persistence and train/test splits."""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Example, KnowledgeType, OutcomeLabel, Task
from .embedding import EmbeddingProvider, embed_text
from .errors import (
    CorruptRecord,
    DegenerateSplit,
    DimensionMismatch,
    IoFailure,
    ProviderMismatch,
    ReflectMemError,
    SchemaVersionMismatch,
    ZeroVector,
)
from .extraction import DEFAULT_OBS_CHAR_CAP, DEFAULT_STEP_CAP, KnowledgeRecord, extract_knowledge
from .generation import GenerationProvider, TokenUsage
from .validation import check_examples, check_k

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# Scores are rounded so mathematically equal similarities tie exactly.
SCORE_DECIMALS = 12


class OutcomeFilter(str, enum.Enum):
    ALL = "all"
    POSITIVE_ONLY = "positive_only"
    NEGATIVE_ONLY = "negative_only"

    def admits(self, outcome: OutcomeLabel) -> bool:
        if self is OutcomeFilter.POSITIVE_ONLY:
            return outcome is OutcomeLabel.SUCCESS
        if self is OutcomeFilter.NEGATIVE_ONLY:
            return outcome is OutcomeLabel.FAILURE
        return True


@dataclass(frozen=True)
class MemoryIndex:
    records: tuple[KnowledgeRecord, ...]
    provider_name: str
    dim: int
    knowledge_type: KnowledgeType
    skipped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        object.__setattr__(self, "knowledge_type", KnowledgeType(self.knowledge_type))
        deduped: dict[str, KnowledgeRecord] = {}
        for rec in self.records:
            if rec.embedding.shape != (self.dim,):
                raise DimensionMismatch(
                    f"record {rec.task_id!r} has embedding shape {rec.embedding.shape}, index dim is {self.dim}"
                )
            if rec.knowledge_type is not self.knowledge_type:
                raise ValueError(f"record {rec.task_id!r} is {rec.knowledge_type.value}, index holds {self.knowledge_type.value}")
            deduped[rec.task_id] = rec
        object.__setattr__(self, "records", tuple(deduped.values()))

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def _matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.records:
            return np.zeros((0, self.dim)), np.zeros(0)
        mat = np.stack([r.embedding for r in self.records])
        norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
        if np.any(norms == 0):
            bad = self.records[int(np.argmax(norms == 0))].task_id
            raise ZeroVector(f"record {bad!r} has a zero embedding")
        return mat, norms

    def header(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "provider_name": self.provider_name,
            "dim": self.dim,
            "knowledge_type": self.knowledge_type.value,
        }


@dataclass(frozen=True)
class RetrievalResult:
    record: KnowledgeRecord
    score: float
    rank: int

    def to_dict(self) -> dict:
        return {"rank": self.rank, "score": self.score, "record": self.record.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "RetrievalResult":
        return cls(KnowledgeRecord.from_dict(data["record"]), float(data["score"]), int(data["rank"]))


def build_memory(
    dataset: Sequence[Example] | Sequence[tuple[Task, object]],
    knowledge_type: KnowledgeType | str,
    outcome_filter: OutcomeFilter | str,
    gen: GenerationProvider | None,
    embedder: EmbeddingProvider,
    *,
    on_error: str = "raise",
    n_jobs: int = 4,
    step_cap: int | None = DEFAULT_STEP_CAP,
    obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP,
    usage: TokenUsage | None = None,
) -> MemoryIndex:
    """Extract one record per (task, trajectory) that passes ``outcome_filter``.

    ``on_error="skip"`` logs and drops failing items (their ids end up in
    ``MemoryIndex.skipped``); ``"raise"`` aborts on the first failure.
    Records keep dataset order; a repeated task id replaces the earlier record.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    knowledge_type = KnowledgeType(knowledge_type)
    outcome_filter = OutcomeFilter(outcome_filter)
    examples = [ex for ex in check_examples(dataset) if outcome_filter.admits(ex.trajectory.outcome)]

    def work(ex: Example):
        try:
            return extract_knowledge(
                ex.trajectory, ex.task, knowledge_type, gen, embedder,
                step_cap=step_cap, obs_char_cap=obs_char_cap, usage=usage,
            )
        except ReflectMemError as exc:
            if on_error == "raise":
                raise
            logger.warning("skipping task %s: %s", ex.task.id, exc)
            return ex.task.id

    if n_jobs > 1 and len(examples) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outputs = list(pool.map(work, examples))
    else:
        outputs = [work(ex) for ex in examples]
    records = [o for o in outputs if isinstance(o, KnowledgeRecord)]
    skipped = tuple(o for o in outputs if isinstance(o, str))
    return MemoryIndex(tuple(records), embedder.name, embedder.dim, knowledge_type, skipped)


def _query_text(query: Task | str) -> str:
    return query.key_text if isinstance(query, Task) else query


def retrieve(
    index: MemoryIndex,
    query: Task | str,
    k: int,
    embedder: EmbeddingProvider,
    *,
    exclude_self: bool = False,
) -> list[RetrievalResult]:
    """Top-``k`` records by cosine similarity between task keys.

    Ordered by score descending, ties going to the earlier-inserted record.
    ``query`` is a Task (its key text is embedded) or raw key text.
    ``exclude_self`` drops records whose task id equals the query task's id.
    """
    check_k(k)
    if embedder.name != index.provider_name or embedder.dim != index.dim:
        raise ProviderMismatch(
            f"index was built with {index.provider_name} (dim {index.dim}); "
            f"got {embedder.name} (dim {embedder.dim})"
        )
    if not index.records:
        return []
    q = embed_text(embedder, _query_text(query))
    q_norm = math.sqrt(float(np.dot(q, q)))
    if q_norm == 0.0:
        raise ZeroVector("query embedding is zero")
    mat, norms = index._matrix
    scores = np.clip(np.round((mat @ q) / (norms * q_norm), SCORE_DECIMALS), -1.0, 1.0)
    candidates = np.arange(len(index.records))
    if exclude_self and isinstance(query, Task):
        candidates = np.array([i for i in candidates if index.records[i].task_id != query.id], dtype=int)
    # lexsort: last key is primary
    order = candidates[np.lexsort((candidates, -scores[candidates]))][:k]
    return [
        RetrievalResult(index.records[i], float(scores[i]), rank)
        for rank, i in enumerate(order, start=1)
    ]


def save_index(index: MemoryIndex, path: str | Path) -> None:
    path = Path(path)
    lines = [json.dumps(index.header(), sort_keys=True)]
    lines += [json.dumps(r.to_dict(), sort_keys=True) for r in index.records]
    payload = "".join(line + "\n" for line in lines)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write index {path}: {exc}") from exc


def load_index(path: str | Path) -> MemoryIndex:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise IoFailure(f"cannot read index {path}: {exc}") from exc
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptRecord(f"{path} is empty; expected a header line", line=1)
    try:
        header = json.loads(lines[0])
        version = header["version"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptRecord(f"bad header: {exc}", line=1) from exc
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"{path} has schema version {version!r}; supported: {SCHEMA_VERSION}")
    try:
        dim = int(header["dim"])
        provider_name = str(header["provider_name"])
        knowledge_type = KnowledgeType(header["knowledge_type"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptRecord(f"bad header: {exc}", line=1) from exc
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = KnowledgeRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(f"unreadable record: {exc}", line=lineno) from exc
        if rec.embedding.shape != (dim,):
            raise CorruptRecord(f"embedding length {rec.embedding.shape[0]} != dim {dim}", line=lineno)
        records.append(rec)
    return MemoryIndex(tuple(records), provider_name, dim, knowledge_type)


def split_train_test(
    dataset: Sequence, train_fraction: float = 0.8, seed: int = 0
) -> tuple[list, list]:
    """Seeded random partition; both halves keep the input order.

    ``len(train) == round(train_fraction * n)`` with halves rounded up.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(dataset)
    n_train = math.floor(train_fraction * n + 0.5)
    if n_train == 0 or n_train == n:
        raise DegenerateSplit(f"a {train_fraction:g} split of {n} items leaves one side empty")
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = set(perm[:n_train].tolist())
    train = [item for i, item in enumerate(dataset) if i in train_idx]
    test = [item for i, item in enumerate(dataset) if i not in train_idx]
    return train, test
