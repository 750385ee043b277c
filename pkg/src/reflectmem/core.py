"""Domain types shared across the package.

All types are frozen dataclasses. JSON serialization uses snake_case keys
matching the field names; datasets are newline-delimited JSON with one
``{"task": {...}, "trajectory": {...}}`` object per line.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CorruptRecord, EmptyTrajectory, IoFailure


class KnowledgeType(str, enum.Enum):
    ONE_SHOT = "one_shot"
    SUMMARY = "summary"
    WEB_REFLECTION = "web_reflection"


class OutcomeLabel(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"

    @classmethod
    def from_reward(cls, reward: int) -> "OutcomeLabel":
        if reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {reward!r}")
        return cls.SUCCESS if reward == 1 else cls.FAILURE

    @property
    def reward(self) -> int:
        return 1 if self is OutcomeLabel.SUCCESS else 0


@dataclass(frozen=True)
class LLMConfig:
    temperature: float = 0.0
    top_p: float = 0.5

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")


def task_key(task: "Task") -> str:
    """Canonical text embedded for retrieval."""
    return f"Go to {task.start_url}, {task.intent}"


_KEY_RE = re.compile(r"^Go to (.*?), (.*)$", re.S)


def parse_task_key(text: str, task_id: str = "query") -> "Task":
    """Inverse of :func:`task_key`. Splits at the first ``", "``, so start URLs
    containing ``", "`` do not round-trip. Text not in key form becomes the intent."""
    m = _KEY_RE.match(text)
    if m is None:
        return Task(task_id, "", "", text)
    return Task(task_id, "", m.group(1), m.group(2))


@dataclass(frozen=True)
class Task:
    id: str
    site: str
    start_url: str
    intent: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("task id must be non-empty")

    @property
    def key_text(self) -> str:
        return task_key(self)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Task":
        return cls(
            id=str(data["id"]),
            site=str(data.get("site", "")),
            start_url=str(data["start_url"]),
            intent=str(data["intent"]),
        )


@dataclass(frozen=True)
class Step:
    observation: str
    action: str

    def __post_init__(self):
        if not self.action:
            raise ValueError("step action must be non-empty")


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    steps: tuple[Step, ...]
    reward: int
    wall_time_s: float = 0.0
    total_tokens: int = 0
    prompt_tokens: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {self.reward!r}")
        if self.wall_time_s < 0:
            raise ValueError("wall_time_s must be non-negative")
        if self.prompt_tokens < 0 or self.total_tokens < 0:
            raise ValueError("token counts must be non-negative")
        if self.prompt_tokens > self.total_tokens:
            raise ValueError("prompt_tokens cannot exceed total_tokens")

    @property
    def outcome(self) -> OutcomeLabel:
        return OutcomeLabel.from_reward(self.reward)

    def require_steps(self) -> None:
        if not self.steps:
            raise EmptyTrajectory(f"trajectory for task {self.task_id!r} has no steps")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "steps": [asdict(s) for s in self.steps],
            "reward": self.reward,
            "wall_time_s": self.wall_time_s,
            "total_tokens": self.total_tokens,
            "prompt_tokens": self.prompt_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        return cls(
            task_id=str(data["task_id"]),
            steps=tuple(Step(**s) for s in data["steps"]),
            reward=int(data["reward"]),
            wall_time_s=float(data.get("wall_time_s", 0.0)),
            total_tokens=int(data.get("total_tokens", 0)),
            prompt_tokens=int(data.get("prompt_tokens", 0)),
        )


@dataclass(frozen=True)
class Example:
    """One dataset entry: a task paired with the trajectory recorded for it."""

    task: Task
    trajectory: Trajectory = field(repr=False)

    def to_dict(self) -> dict:
        return {"task": self.task.to_dict(), "trajectory": self.trajectory.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Example":
        return cls(Task.from_dict(data["task"]), Trajectory.from_dict(data["trajectory"]))


def read_dataset(path: str | Path) -> list[Example]:
    """Load a newline-delimited JSON dataset. Blank lines are ignored."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read dataset {path}: {exc}") from exc
    examples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            examples.append(Example.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(f"{path}: {exc}", line=lineno) from exc
    return examples


def write_dataset(examples: Iterable[Example], path: str | Path) -> None:
    lines = [json.dumps(ex.to_dict(), sort_keys=True) for ex in examples]
    try:
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write dataset {path}: {exc}") from exc
