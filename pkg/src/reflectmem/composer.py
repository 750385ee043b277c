"""Compose agent prompts from retrieved knowledge."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .core import KnowledgeType, OutcomeLabel, Task
from .errors import MixedKnowledgeTypes
from .templates import load_template

if TYPE_CHECKING:
    from .memory import RetrievalResult


def estimate_tokens(text: str) -> int:
    """Heuristic token count, ``ceil(len(text) / 4)``.

    Only used where a provider did not report measured counts.
    """
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class ComposedPrompt:
    text: str
    knowledge_count: int
    estimated_tokens: int
    knowledge_type: KnowledgeType


def _split_one_shot():
    raw = load_template("one_shot_injection")
    preamble, rest = raw.split("### Example", 1)
    block, new_task = rest.split("### NEW TASK", 1)
    header, inner = ("### Example" + block).split("\n", 1)
    # inner is "OBJECTIVE: {objective}\n{trajectory}\n\n"
    return preamble, header + "\n", inner.rstrip("\n"), "### NEW TASK" + new_task


_OS_PREAMBLE, _OS_HEADER, ONE_SHOT_INNER, NEW_TASK_BLOCK = _split_one_shot()


def _split_prose(name: str):
    raw = load_template(name)
    preamble, block = raw.split("Example {task_id}:", 1)
    block = "Example {task_id}:" + block
    if not block.endswith("\n\n"):
        block += "\n"
    return preamble, block


_SUMMARY_PREAMBLE, _SUMMARY_BLOCK = _split_prose("summary_injection")
_REFLECT_PREAMBLE, _REFLECT_BLOCK = _split_prose("web_reflection_injection")

BARE_OBJECTIVE_BLOCK = "OBJECTIVE:\n{objective}\n"


def _outcome_word(outcome: OutcomeLabel) -> str:
    return "Success" if outcome is OutcomeLabel.SUCCESS else "Failure"


def render_block(record, knowledge_type: KnowledgeType) -> str:
    if knowledge_type is KnowledgeType.ONE_SHOT:
        header = _OS_HEADER.format(task_id=record.task_id, reward=record.outcome.reward)
        return header + record.content + "\n\n"
    template = _SUMMARY_BLOCK if knowledge_type is KnowledgeType.SUMMARY else _REFLECT_BLOCK
    slot = "summary_str" if knowledge_type is KnowledgeType.SUMMARY else "reflect_str"
    return template.format(
        task_id=record.task_id,
        objective=record.objective,
        was_success=_outcome_word(record.outcome),
        **{slot: record.content},
    )


def _assemble(task: Task, blocks: list[str], knowledge_type: KnowledgeType) -> str:
    if not blocks:
        return BARE_OBJECTIVE_BLOCK.format(objective=task.intent)
    preamble = {
        KnowledgeType.ONE_SHOT: _OS_PREAMBLE,
        KnowledgeType.SUMMARY: _SUMMARY_PREAMBLE,
        KnowledgeType.WEB_REFLECTION: _REFLECT_PREAMBLE,
    }[knowledge_type]
    return preamble + "".join(blocks) + NEW_TASK_BLOCK.format(objective=task.intent)


def compose_prompt(
    task: Task,
    results: Sequence["RetrievalResult"],
    knowledge_type: KnowledgeType | str,
    *,
    max_tokens: int | None = None,
) -> ComposedPrompt:
    """Render retrieved knowledge ahead of the new task's objective.

    Blocks keep the order of ``results``. With ``max_tokens`` set, the
    lowest-ranked blocks are dropped until the estimate fits.
    """
    knowledge_type = KnowledgeType(knowledge_type)
    for r in results:
        if r.record.knowledge_type is not knowledge_type:
            raise MixedKnowledgeTypes(
                f"record {r.record.task_id!r} is {r.record.knowledge_type.value}, "
                f"expected {knowledge_type.value}"
            )
    blocks = [render_block(r.record, knowledge_type) for r in results]
    text = _assemble(task, blocks, knowledge_type)
    if max_tokens is not None:
        while blocks and estimate_tokens(text) > max_tokens:
            blocks.pop()
            text = _assemble(task, blocks, knowledge_type)
    return ComposedPrompt(text, len(blocks), estimate_tokens(text), knowledge_type)
