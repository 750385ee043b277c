from __future__ import annotations

from pathlib import Path

import pytest

from reflectmem import HashingEmbedder, Step, Task, Trajectory

GOLDEN = Path(__file__).parent / "golden"


def make_task(task_id="t1", intent="find mugs", start_url="SHOP", site="shopping"):
    return Task(task_id, site, start_url, intent)


def make_traj(task_id="t1", n_steps=2, reward=1, obs="page text"):
    steps = tuple(Step(f"{obs} {i}", f"click {i}") for i in range(1, n_steps + 1))
    return Trajectory(task_id, steps, reward, wall_time_s=1.0, total_tokens=20, prompt_tokens=10)


def golden(name: str) -> str:
    return (GOLDEN / f"{name}.txt").read_text(encoding="utf-8")


@pytest.fixture
def embedder():
    return HashingEmbedder()
