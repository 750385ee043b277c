"""Turn a trajectory into a knowledge record: one-shot transcript, summary or web reflection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .composer import ONE_SHOT_INNER
from .core import KnowledgeType, OutcomeLabel, Task, Trajectory, task_key
from .embedding import EmbeddingProvider, embed_text
from .errors import EmptyCompletion, UnparseableReflection
from .generation import GenerationProvider, TokenUsage
from .reflection import StructuredReflection, parse_reflection_sections
from .templates import load_template

DEFAULT_STEP_CAP = 10
DEFAULT_OBS_CHAR_CAP = 2000


@dataclass(frozen=True, eq=False)
class KnowledgeRecord:
    task_id: str
    task_text: str
    objective: str
    knowledge_type: KnowledgeType
    outcome: OutcomeLabel
    content: str
    embedding: np.ndarray

    def __post_init__(self):
        if not self.content:
            raise ValueError(f"record {self.task_id!r} has empty content")
        emb = np.array(self.embedding, dtype=np.float64)
        emb.flags.writeable = False
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "knowledge_type", KnowledgeType(self.knowledge_type))
        object.__setattr__(self, "outcome", OutcomeLabel(self.outcome))

    def __eq__(self, other):
        if not isinstance(other, KnowledgeRecord):
            return NotImplemented
        return (
            self.task_id == other.task_id
            and self.task_text == other.task_text
            and self.objective == other.objective
            and self.knowledge_type is other.knowledge_type
            and self.outcome is other.outcome
            and self.content == other.content
            and self.embedding.shape == other.embedding.shape
            and self.embedding.tobytes() == other.embedding.tobytes()
        )

    __hash__ = None

    def structured(self) -> StructuredReflection:
        """Parsed reflection sections; an empty structure when the content is free-form."""
        try:
            return parse_reflection_sections(self.content)
        except UnparseableReflection:
            return StructuredReflection()

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "task_text": self.task_text,
            "objective": self.objective,
            "knowledge_type": self.knowledge_type.value,
            "outcome": self.outcome.value,
            "content": self.content,
            "embedding": self.embedding.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnowledgeRecord":
        return cls(
            task_id=str(data["task_id"]),
            task_text=str(data["task_text"]),
            objective=str(data["objective"]),
            knowledge_type=KnowledgeType(data["knowledge_type"]),
            outcome=OutcomeLabel(data["outcome"]),
            content=str(data["content"]),
            embedding=np.asarray(data["embedding"], dtype=np.float64),
        )


def render_transcript(
    trajectory: Trajectory,
    *,
    step_cap: int | None = None,
    obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP,
    include_reward: bool = False,
) -> str:
    """Flatten steps to ``STEP n / OBSERVATION / ACTION`` lines.

    With ``step_cap`` only the last ``step_cap`` steps are kept, preceded by a
    marker line; step numbers keep their original values.
    """
    trajectory.require_steps()
    steps = list(enumerate(trajectory.steps, start=1))
    lines = []
    if step_cap is not None and len(steps) > step_cap:
        omitted = len(steps) - step_cap
        steps = steps[omitted:]
        lines.append(f"[... {omitted} earlier steps omitted ...]")
    for n, step in steps:
        obs = step.observation
        if obs_char_cap is not None and len(obs) > obs_char_cap:
            obs = obs[:obs_char_cap] + " [...]"
        lines.append(f"STEP {n}:")
        lines.append(f"OBSERVATION: {obs}")
        lines.append(f"ACTION: {step.action}")
    if include_reward:
        lines.append(f"REWARD: {trajectory.reward}")
    return "\n".join(lines)


def format_one_shot(
    trajectory: Trajectory,
    task: Task,
    *,
    step_cap: int | None = DEFAULT_STEP_CAP,
    obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP,
) -> str:
    transcript = render_transcript(
        trajectory, step_cap=step_cap, obs_char_cap=obs_char_cap, include_reward=True
    )
    return ONE_SHOT_INNER.format(objective=task.intent, trajectory=transcript)


def _is_success(trajectory: Trajectory) -> str:
    return "True" if trajectory.reward == 1 else "False"


def fill_extraction_prompt(
    template_name: str, trajectory: Trajectory, task: Task, *, obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP
) -> str:
    transcript = render_transcript(trajectory, obs_char_cap=obs_char_cap)
    return load_template(template_name).format(
        objective=task.intent, is_success=_is_success(trajectory), trajectory=transcript
    )


def _generate(prompt: str, gen: GenerationProvider, usage: TokenUsage | None) -> str:
    result = gen.generate(prompt)
    if usage is not None:
        usage.add(result)
    if not result.text.strip():
        raise EmptyCompletion(f"{gen.name} returned an empty completion")
    return result.text


def generate_summary(
    trajectory: Trajectory,
    task: Task,
    gen: GenerationProvider,
    *,
    usage: TokenUsage | None = None,
    obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP,
) -> str:
    prompt = fill_extraction_prompt("summary_extraction", trajectory, task, obs_char_cap=obs_char_cap)
    return _generate(prompt, gen, usage)


def generate_web_reflection(
    trajectory: Trajectory,
    task: Task,
    gen: GenerationProvider,
    *,
    usage: TokenUsage | None = None,
    obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP,
) -> str:
    prompt = fill_extraction_prompt("web_reflection_extraction", trajectory, task, obs_char_cap=obs_char_cap)
    return _generate(prompt, gen, usage)


def extract_knowledge(
    trajectory: Trajectory,
    task: Task,
    knowledge_type: KnowledgeType | str,
    gen: GenerationProvider | None,
    embedder: EmbeddingProvider,
    *,
    step_cap: int | None = DEFAULT_STEP_CAP,
    obs_char_cap: int | None = DEFAULT_OBS_CHAR_CAP,
    usage: TokenUsage | None = None,
) -> KnowledgeRecord:
    """Build the memory entry for one (task, trajectory) pair.

    The embedding is always computed from the task key, never from the content.
    ``gen`` may be None for one-shot records.
    """
    knowledge_type = KnowledgeType(knowledge_type)
    trajectory.require_steps()
    if knowledge_type is KnowledgeType.ONE_SHOT:
        content = format_one_shot(trajectory, task, step_cap=step_cap, obs_char_cap=obs_char_cap)
    else:
        if gen is None:
            raise ValueError(f"{knowledge_type.value} extraction needs a generation provider")
        extract = generate_summary if knowledge_type is KnowledgeType.SUMMARY else generate_web_reflection
        content = extract(trajectory, task, gen, usage=usage, obs_char_cap=obs_char_cap)
    key = task_key(task)
    return KnowledgeRecord(
        task_id=task.id,
        task_text=key,
        objective=task.intent,
        knowledge_type=knowledge_type,
        outcome=trajectory.outcome,
        content=content,
        embedding=embed_text(embedder, key),
    )
