"""Reflection memory for web-navigation agents.

Stores knowledge distilled from past trajectories, retrieves the records
whose task keys are closest to a new task, and injects them into the
agent's prompt.
"""

from .composer import ComposedPrompt, compose_prompt, estimate_tokens
from .core import Example, KnowledgeType, LLMConfig, OutcomeLabel, Step, Task, Trajectory, task_key
from .embedding import HashingEmbedder, RemoteEmbedder, cosine_similarity, embed_text
from .estimator import ReflectionMemory
from .extraction import (
    KnowledgeRecord,
    extract_knowledge,
    format_one_shot,
    generate_summary,
    generate_web_reflection,
)
from .generation import EchoGenerator, HeuristicReflector, RemoteGenerator, TokenUsage
from .memory import (
    MemoryIndex,
    OutcomeFilter,
    RetrievalResult,
    build_memory,
    load_index,
    retrieve,
    save_index,
    split_train_test,
)
from .reflection import StructuredReflection, parse_reflection_sections, render_reflection

__version__ = "0.1.0"

__all__ = [
    "ComposedPrompt", "compose_prompt", "estimate_tokens",
    "Example", "KnowledgeType", "LLMConfig", "OutcomeLabel", "Step", "Task", "Trajectory", "task_key",
    "HashingEmbedder", "RemoteEmbedder", "cosine_similarity", "embed_text",
    "ReflectionMemory",
    "KnowledgeRecord", "extract_knowledge", "format_one_shot", "generate_summary", "generate_web_reflection",
    "EchoGenerator", "HeuristicReflector", "RemoteGenerator", "TokenUsage",
    "MemoryIndex", "OutcomeFilter", "RetrievalResult", "build_memory", "load_index", "retrieve",
    "save_index", "split_train_test",
    "StructuredReflection", "parse_reflection_sections", "render_reflection",
]
