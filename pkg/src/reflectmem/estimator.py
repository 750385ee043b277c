"""scikit-learn style front end over the memory pipeline.

>>> mem = ReflectionMemory(knowledge_type="web_reflection", k=5).fit(tasks, trajectories)
>>> prompts = mem.transform(new_tasks)        # composed prompt texts
"""

from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .composer import ComposedPrompt, compose_prompt
from .core import KnowledgeType
from .embedding import HashingEmbedder
from .errors import ProviderMismatch
from .extraction import DEFAULT_OBS_CHAR_CAP, DEFAULT_STEP_CAP
from .generation import HeuristicReflector, TokenUsage
from .memory import MemoryIndex, OutcomeFilter, RetrievalResult, build_memory, load_index, retrieve, save_index
from .validation import check_examples, check_k, check_task


class ReflectionMemory(TransformerMixin, BaseEstimator):
    """Reflection memory as an estimator.

    ``fit`` extracts one knowledge record per (task, trajectory) and embeds the
    task keys. ``kneighbors`` returns the top-``k`` records for each query
    task, and ``transform`` turns each query task into an agent prompt with
    those records injected ahead of the objective.

    Parameters
    ----------
    knowledge_type : {"one_shot", "summary", "web_reflection"}
    outcome_filter : {"all", "positive_only", "negative_only"}
        Which trajectories may enter memory, by their reward.
    k : int
        Number of records retrieved per query.
    embedder, generator : provider objects
        Default to :class:`HashingEmbedder` and :class:`HeuristicReflector`.
    exclude_self : bool
        Skip records that came from the query task itself.
    step_cap, obs_char_cap : int or None
        Truncation applied to one-shot transcripts.
    max_prompt_tokens : int or None
        Drop the lowest-ranked blocks until the estimated prompt fits.
    on_error : {"raise", "skip"}
    n_jobs : int
        Concurrent extraction calls during ``fit``.
    """

    def __init__(
        self,
        knowledge_type="web_reflection",
        outcome_filter="all",
        k=5,
        embedder=None,
        generator=None,
        exclude_self=False,
        step_cap=DEFAULT_STEP_CAP,
        obs_char_cap=DEFAULT_OBS_CHAR_CAP,
        max_prompt_tokens=None,
        on_error="raise",
        n_jobs=4,
    ):
        self.knowledge_type = knowledge_type
        self.outcome_filter = outcome_filter
        self.k = k
        self.embedder = embedder
        self.generator = generator
        self.exclude_self = exclude_self
        self.step_cap = step_cap
        self.obs_char_cap = obs_char_cap
        self.max_prompt_tokens = max_prompt_tokens
        self.on_error = on_error
        self.n_jobs = n_jobs

    def _resolve_providers(self):
        embedder = self.embedder if self.embedder is not None else HashingEmbedder()
        generator = self.generator if self.generator is not None else HeuristicReflector()
        return embedder, generator

    def fit(self, X, y=None):
        """X: tasks with ``y`` their trajectories, or a sequence of (task, trajectory) pairs."""
        check_k(self.k)
        examples = check_examples(X, y)
        self.embedder_, generator = self._resolve_providers()
        self.usage_ = TokenUsage()
        self.index_ = build_memory(
            examples,
            KnowledgeType(self.knowledge_type),
            OutcomeFilter(self.outcome_filter),
            generator,
            self.embedder_,
            on_error=self.on_error,
            n_jobs=self.n_jobs,
            step_cap=self.step_cap,
            obs_char_cap=self.obs_char_cap,
            usage=self.usage_,
        )
        self.n_records_ = len(self.index_)
        self.skipped_ = list(self.index_.skipped)
        return self

    def set_index(self, index: MemoryIndex):
        """Attach a prebuilt index instead of fitting."""
        embedder, _ = self._resolve_providers()
        if embedder.name != index.provider_name or embedder.dim != index.dim:
            raise ProviderMismatch(f"index built with {index.provider_name}, estimator uses {embedder.name}")
        self.embedder_ = embedder
        self.index_ = index
        self.usage_ = TokenUsage()
        self.n_records_ = len(index)
        self.skipped_ = list(index.skipped)
        return self

    def load(self, path: str | Path):
        return self.set_index(load_index(path))

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "index_")
        save_index(self.index_, path)

    def kneighbors(self, X, k=None) -> list[list[RetrievalResult]]:
        check_is_fitted(self, "index_")
        k = check_k(self.k if k is None else k)
        return [
            retrieve(self.index_, check_task(t), k, self.embedder_, exclude_self=self.exclude_self)
            for t in X
        ]

    def compose(self, task) -> ComposedPrompt:
        task = check_task(task)
        hits = self.kneighbors([task])[0]
        return compose_prompt(task, hits, self.index_.knowledge_type, max_tokens=self.max_prompt_tokens)

    def transform(self, X) -> list[str]:
        check_is_fitted(self, "index_")
        return [self.compose(t).text for t in X]
