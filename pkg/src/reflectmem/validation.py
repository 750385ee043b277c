"""Input validation helpers shared by the functional API and the estimator."""

from __future__ import annotations

import numbers
from typing import Iterable

from .core import Example, Task, Trajectory


def check_k(k) -> int:
    if isinstance(k, bool) or not isinstance(k, numbers.Integral) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    return int(k)


def check_task(task) -> Task:
    """Accept a Task, a task dict, an Example or a ``(task, trajectory)`` pair."""
    if isinstance(task, Task):
        return task
    if isinstance(task, Example):
        return task.task
    if isinstance(task, dict):
        return Task.from_dict(task["task"] if "task" in task else task)
    if isinstance(task, tuple) and len(task) == 2:
        return check_task(task[0])
    raise TypeError(f"expected a Task or task dict, got {type(task).__name__}")


def check_examples(X, y: Iterable[Trajectory] | None = None) -> list[Example]:
    """Normalize a dataset to a list of Example.

    Accepts a sequence of Example, of ``(task, trajectory)`` pairs, of dicts in
    the dataset file schema, or parallel sequences ``X`` (tasks) and ``y``
    (trajectories).
    """
    if y is not None:
        X, y = list(X), list(y)
        if len(X) != len(y):
            raise ValueError(f"got {len(X)} tasks but {len(y)} trajectories")
        items = list(zip(X, y))
    else:
        items = list(X)
    examples = []
    for item in items:
        if isinstance(item, Example):
            ex = item
        elif isinstance(item, dict):
            ex = Example.from_dict(item)
        else:
            task, traj = item
            if isinstance(traj, dict):
                traj = Trajectory.from_dict(traj)
            ex = Example(check_task(task), traj)
        if ex.trajectory.task_id != ex.task.id:
            raise ValueError(
                f"trajectory task_id {ex.trajectory.task_id!r} does not match task id {ex.task.id!r}"
            )
        examples.append(ex)
    return examples
