"""Offline evaluation: a toy web environment, a scripted agent and cost/SR metrics."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from .composer import BARE_OBJECTIVE_BLOCK, ComposedPrompt, compose_prompt, estimate_tokens
from .core import Example, KnowledgeType, Step, Task, Trajectory
from .errors import ConfigError, EmptyGroup, NonPositiveBaseline, UnknownTask
from .memory import MemoryIndex, OutcomeFilter, build_memory, retrieve, save_index, split_train_test
from .providers import make_embedder, make_generator

logger = logging.getLogger(__name__)

SUBSETS = ("overall", "positive_only", "negative_only")


@dataclass(frozen=True)
class Trap:
    """An action that looks right but does nothing; ``detour`` reaches ``intended_page`` instead."""

    page: str
    action: str
    intended_page: str
    hint: str
    detour: tuple[str, ...]


@dataclass(frozen=True)
class Shortcut:
    page: str
    action: str
    target_page: str
    hint: str


@dataclass(frozen=True)
class EnvTask:
    task: Task
    start_page: str
    goal_page: str
    plan: tuple[str, ...]


class ToyEnvironment:
    """Deterministic page graph standing in for a real website benchmark.

    ``transitions`` maps ``(page, action)`` to the next page. Trap actions leave
    the page unchanged and print a ``Limitation:`` note; pages with a shortcut
    print a ``Shortcut:`` note. A task succeeds when the agent lands on its goal page.
    """

    def __init__(
        self,
        transitions: Mapping[tuple[str, str], str],
        tasks: Sequence[EnvTask],
        *,
        traps: Sequence[Trap] = (),
        shortcuts: Sequence[Shortcut] = (),
        max_steps: int = 15,
    ):
        self.transitions = dict(transitions)
        self.traps = {(t.page, t.action): t for t in traps}
        self.shortcuts = list(shortcuts)
        for sc in self.shortcuts:
            self.transitions[(sc.page, sc.action)] = sc.target_page
        self.max_steps = max_steps
        self.tasks = {et.task.id: et for et in tasks}
        if len(self.tasks) != len(tasks):
            raise ValueError("duplicate task ids in environment")
        self._validate()

    def _validate(self) -> None:
        goals = {et.goal_page for et in self.tasks.values()}
        for trap in self.traps.values():
            if (trap.page, trap.action) in self.transitions:
                raise ValueError(f"trap {trap.action!r} on {trap.page} also has a real transition")
            if trap.page in goals:
                raise ValueError(f"trap on goal page {trap.page}")
        for et in self.tasks.values():
            dist = self._distance(et.start_page, et.goal_page)
            if dist is None or dist > self.max_steps:
                raise ValueError(f"goal of task {et.task.id} unreachable within {self.max_steps} steps")
            self.expected_pages(et)

    def _distance(self, start: str, goal: str) -> int | None:
        seen, queue = {start: 0}, deque([start])
        while queue:
            page = queue.popleft()
            if page == goal:
                return seen[page]
            for (src, _), dst in self.transitions.items():
                if src == page and dst not in seen:
                    seen[dst] = seen[page] + 1
                    queue.append(dst)
        return None

    def get(self, task_id: str) -> EnvTask:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownTask(f"task {task_id!r} is not registered in the environment") from None

    def actions_at(self, page: str) -> list[str]:
        acts = {a for (p, a) in self.transitions if p == page}
        acts |= {a for (p, a) in self.traps if p == page}
        return sorted(acts)

    def observe(self, page: str) -> str:
        text = f"[{page}] Visible actions: {', '.join(self.actions_at(page))}."
        for sc in self.shortcuts:
            if sc.page == page:
                text += f" Shortcut: {sc.hint}."
        return text

    def trap_at(self, page: str, action: str) -> Trap | None:
        return self.traps.get((page, action))

    def step(self, page: str, action: str) -> tuple[str, str]:
        """Apply ``action`` and return ``(next_page, observation)``."""
        trap = self.trap_at(page, action)
        if trap is not None:
            return page, f"[{page}] Action '{action}' had no effect. Limitation: {trap.hint}."
        nxt = self.transitions.get((page, action))
        if nxt is None:
            return page, f"[{page}] Action '{action}' is not available here."
        return nxt, self.observe(nxt)

    def expected_pages(self, et: EnvTask) -> list[str]:
        """Page reached after each plan action, assuming traps worked as advertised."""
        page, pages = et.start_page, []
        for action in et.plan:
            trap = self.trap_at(page, action)
            page = trap.intended_page if trap else self.transitions.get((page, action))
            if page is None:
                raise ValueError(f"plan of task {et.task.id} uses unknown action {action!r}")
            pages.append(page)
        if pages[-1] != et.goal_page:
            raise ValueError(f"plan of task {et.task.id} does not end on its goal page")
        return pages


@dataclass(frozen=True)
class ScriptedAgent:
    """Deterministic policy: follow the task's plan, unless the prompt says otherwise.

    A trap whose hint appears in the prompt is replaced by its detour; a
    shortcut whose hint appears is taken when it lands on a page still ahead
    in the plan. Without hints a trap is retried until the budget runs out.
    """

    step_budget: int | None = None

    def act(self, env: ToyEnvironment, et: EnvTask, prompt_text: str) -> tuple[list[Step], str]:
        """Return the steps taken and the final page."""
        known = prompt_text.lower()
        budget = min(self.step_budget or env.max_steps, env.max_steps)
        ahead = env.expected_pages(et)
        page, pos, pending = et.start_page, 0, deque()
        obs = env.observe(page)
        taken: list[Step] = []
        while len(taken) < budget and page != et.goal_page:
            if pending:
                action = pending.popleft()
            else:
                action = None
                for sc in env.shortcuts:
                    if sc.page == page and sc.hint.lower() in known and sc.target_page in ahead[pos:]:
                        action = sc.action
                        pos = len(ahead) - ahead[::-1].index(sc.target_page)
                        break
                if action is None:
                    action = et.plan[pos]
                    trap = env.trap_at(page, action)
                    if trap is not None and trap.hint.lower() in known:
                        pending.extend(trap.detour)
                        action = pending.popleft()
                        pos += 1
                    elif trap is None:
                        pos += 1
            taken.append(Step(obs, action))
            page, obs = env.step(page, action)
        return taken, page


@dataclass(frozen=True)
class RunResult:
    task_id: str
    success: int
    steps: int
    total_tokens: int
    prompt_tokens: int
    wall_time_s: float
    knowledge_type: str | None
    baseline_success: int | None
    condition: str = "baseline"
    # outcome of the top-ranked record injected into the prompt, if any
    memory_outcome: str | None = None
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "trajectory"}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(**{f.name: data[f.name] for f in fields(cls) if f.name in data})


@dataclass(frozen=True)
class CostModel:
    """Simulated wall time: fixed cost per step plus cost per token."""

    seconds_per_step: float = 2.0
    seconds_per_token: float = 0.001
    real_clock: bool = False


def run_episode(
    env: ToyEnvironment,
    agent: ScriptedAgent,
    task: Task | str,
    prompt: ComposedPrompt | None = None,
    *,
    condition: str = "baseline",
    baseline_success: int | None = None,
    cost: CostModel = CostModel(),
) -> RunResult:
    """Roll the agent out on one task.

    Each step the agent reads the composed prompt followed by the current
    observation; token counts are estimated from that text.
    """
    started = time.perf_counter()
    et = env.get(task if isinstance(task, str) else task.id)
    base = prompt.text if prompt is not None else BARE_OBJECTIVE_BLOCK.format(objective=et.task.intent)
    steps, final_page = agent.act(env, et, base)
    success = int(final_page == et.goal_page)
    prompt_tokens = sum(estimate_tokens(base + "\n" + s.observation) for s in steps)
    total_tokens = prompt_tokens + sum(estimate_tokens(s.action) for s in steps)
    if cost.real_clock:
        wall = time.perf_counter() - started
    else:
        wall = cost.seconds_per_step * len(steps) + cost.seconds_per_token * total_tokens
    traj = Trajectory(et.task.id, tuple(steps), success, wall, total_tokens, prompt_tokens)
    return RunResult(
        task_id=et.task.id,
        success=success,
        steps=len(steps),
        total_tokens=total_tokens,
        prompt_tokens=prompt_tokens,
        wall_time_s=wall,
        knowledge_type=prompt.knowledge_type.value if prompt is not None else None,
        baseline_success=success if baseline_success is None and condition == "baseline" else baseline_success,
        condition=condition,
        trajectory=traj,
    )


class SuccessSplit(NamedTuple):
    overall: float | None
    prev_success: float | None
    prev_fail: float | None


def _mean(values: Sequence[float]) -> float:
    if not values:
        raise EmptyGroup("mean of an empty group")
    return sum(values) / len(values)


def _mean_or_none(values):
    return _mean(values) if values else None


def compute_success_split(results: Sequence[RunResult], by: str = "baseline") -> SuccessSplit:
    """Success rate overall and split into previously succeeded / failed.

    ``by="baseline"`` splits on the baseline agent's outcome on each task;
    ``by="memory"`` splits on the outcome of the top retrieved record and
    leaves out results that had no record injected. An empty subset yields
    None rather than 0.
    """
    if by == "baseline":
        if any(r.baseline_success is None for r in results):
            raise ValueError("every result needs baseline_success")
        flags = [r.baseline_success for r in results]
    elif by == "memory":
        flags = [None if r.memory_outcome is None else int(r.memory_outcome == "success") for r in results]
    else:
        raise ValueError("by must be 'baseline' or 'memory'")
    return SuccessSplit(
        _mean_or_none([r.success for r in results]),
        _mean_or_none([r.success for r, f in zip(results, flags) if f == 1]),
        _mean_or_none([r.success for r, f in zip(results, flags) if f == 0]),
    )


def sr_gain_points(baseline: Sequence[RunResult], treated: Sequence[RunResult]) -> float:
    return 100.0 * (_mean([r.success for r in treated]) - _mean([r.success for r in baseline]))


def reduction_pct(baseline: float, treated: float) -> float:
    if baseline <= 0:
        raise NonPositiveBaseline(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - treated) / baseline


@dataclass(frozen=True)
class MetricsRow:
    condition: str
    subset: str
    n: int
    total_tokens: float | None
    prompt_tokens: float | None
    wall_time_s: float | None
    steps: float | None
    success_rate: float | None

    def display_cells(self) -> list[str]:
        """Cells in compact cost-table form: ``221k``, ``682``, ``11.92``."""

        def fmt(v, spec):
            return "-" if v is None else spec(v)

        def tokens(v):
            return f"{v / 1000:.0f}k" if v >= 1000 else f"{v:.0f}"

        return [
            self.condition,
            fmt(self.total_tokens, tokens),
            fmt(self.prompt_tokens, tokens),
            fmt(self.wall_time_s, lambda v: f"{v:.0f}"),
            fmt(self.steps, lambda v: f"{v:.2f}"),
        ]


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricsRow, ...]

    def get(self, condition: str, subset: str = "overall") -> MetricsRow:
        for row in self.rows:
            if row.condition == condition and row.subset == subset:
                return row
        raise KeyError((condition, subset))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [f.name for f in fields(MetricsRow)]
        writer.writerow(names)
        for row in self.rows:
            writer.writerow(["" if getattr(row, n) is None else getattr(row, n) for n in names])
        return buf.getvalue()

    def render(self) -> str:
        header = ["Knowledge", "Total Tok.", "Prompt Tok.", "Tct (s)", "Steps", "SR"]
        out = []
        for subset in SUBSETS:
            rows = [r for r in self.rows if r.subset == subset]
            if not rows:
                continue
            body = [r.display_cells() + ["-" if r.success_rate is None else f"{r.success_rate:.2f}"] for r in rows]
            widths = [max(len(c) for c in col) for col in zip(header, *body)]
            out.append(f"== {subset} ==")
            for cells in [header, *body]:
                out.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))))
        return "\n".join(out) + "\n"


def compute_cost_table(groups: Mapping[tuple[str, str], Sequence[RunResult]]) -> MetricsTable:
    """Per-cell arithmetic means. Empty groups give a row of absent values."""
    rows = []
    for (condition, subset), members in groups.items():
        try:
            rows.append(MetricsRow(
                condition, subset, len(members),
                _mean([r.total_tokens for r in members]),
                _mean([r.prompt_tokens for r in members]),
                _mean([r.wall_time_s for r in members]),
                _mean([r.steps for r in members]),
                _mean([r.success for r in members]),
            ))
        except EmptyGroup:
            rows.append(MetricsRow(condition, subset, 0, None, None, None, None, None))
    return MetricsTable(tuple(rows))


def group_by_subset(by_condition: Mapping[str, Sequence[RunResult]]) -> dict[tuple[str, str], list[RunResult]]:
    """Partition each condition's results by the baseline agent's outcome."""
    groups = {}
    for condition, results in by_condition.items():
        groups[(condition, "overall")] = list(results)
        groups[(condition, "positive_only")] = [r for r in results if r.baseline_success == 1]
        groups[(condition, "negative_only")] = [r for r in results if r.baseline_success == 0]
    return groups


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "H2"
    knowledge_type: str = KnowledgeType.WEB_REFLECTION.value
    outcome_filter: str = OutcomeFilter.ALL.value
    k: int = 5
    seed: int = 0
    train_fraction: float = 0.8
    exclude_self: bool = False
    max_prompt_tokens: int | None = None
    jobs: int = 4
    embedder: dict = field(default_factory=lambda: {"kind": "hashing", "dim": 256})
    generator: dict = field(default_factory=lambda: {"kind": "heuristic"})
    out_dir: str | None = None

    def __post_init__(self):
        if self.mode not in ("H1", "H2"):
            raise ConfigError(f"mode must be H1 or H2, got {self.mode!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        try:
            KnowledgeType(self.knowledge_type)
            OutcomeFilter(self.outcome_filter)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    baseline: list[RunResult]
    treated: list[RunResult]
    table: MetricsTable
    index: MemoryIndex
    train_ids: list[str]
    test_ids: list[str]

    @property
    def split(self) -> SuccessSplit:
        return compute_success_split(self.treated)

    @property
    def baseline_split(self) -> SuccessSplit:
        return compute_success_split(self.baseline)

    def summary(self) -> dict:
        return {
            "mode": self.config.mode,
            "knowledge_type": self.config.knowledge_type,
            "n_eval": len(self.treated),
            "n_memory": len(self.index),
            "baseline_sr": self.baseline_split._asdict(),
            "treated_sr": self.split._asdict(),
            "treated_sr_by_memory_outcome": compute_success_split(self.treated, by="memory")._asdict(),
            "sr_gain_points": sr_gain_points(self.baseline, self.treated),
            "step_reduction_pct": reduction_pct(
                self.table.get("baseline").steps, self.table.get(self.config.knowledge_type).steps
            ),
        }


def _write_results(path: Path, results: Sequence[RunResult]) -> None:
    path.write_text("".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results), encoding="utf-8")


def _run_all(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_experiment(
    config: ExperimentConfig,
    env: ToyEnvironment | None = None,
    agent: ScriptedAgent | None = None,
    *,
    cost: CostModel = CostModel(),
) -> ExperimentResult:
    """Baseline pass, memory build, then a knowledge-augmented pass.

    ``H1`` builds memory from every task's baseline rollout and evaluates on
    the same tasks. ``H2`` splits tasks into train/test, builds memory from the
    train rollouts and evaluates on the held-out tasks.
    """
    if env is None:
        from .fixture import fixture_environment

        env = fixture_environment()
    agent = agent or ScriptedAgent()
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    task_ids = sorted(env.tasks)
    baseline: list[RunResult] = []
    treated: list[RunResult] = []
    try:
        baseline = _run_all(lambda tid: run_episode(env, agent, tid, cost=cost), task_ids, config.jobs)
        dataset = [Example(env.get(r.task_id).task, r.trajectory) for r in baseline]
        if config.mode == "H1":
            train, test = dataset, dataset
        else:
            train, test = split_train_test(dataset, config.train_fraction, config.seed)
        embedder = make_embedder(config.embedder)
        generator = make_generator(config.generator)
        index = build_memory(
            train, config.knowledge_type, config.outcome_filter, generator, embedder, n_jobs=config.jobs
        )
        base_by_id = {r.task_id: r for r in baseline}

        def treat(ex: Example) -> RunResult:
            hits = retrieve(index, ex.task, config.k, embedder, exclude_self=config.exclude_self)
            prompt = compose_prompt(ex.task, hits, config.knowledge_type, max_tokens=config.max_prompt_tokens)
            res = run_episode(
                env, agent, ex.task, prompt,
                condition=config.knowledge_type,
                baseline_success=base_by_id[ex.task.id].success,
                cost=cost,
            )
            if hits and prompt.knowledge_count:
                res = replace(res, memory_outcome=hits[0].record.outcome.value)
            return res

        treated = _run_all(treat, test, config.jobs)
    except Exception:
        if out_dir is not None:
            _write_results(out_dir / "results.partial.jsonl", sorted(baseline, key=lambda r: r.task_id) + treated)
        raise

    test_ids = [ex.task.id for ex in test]
    eval_baseline = [base_by_id[t] for t in test_ids]
    treated.sort(key=lambda r: r.task_id)
    table = compute_cost_table(group_by_subset({"baseline": eval_baseline, config.knowledge_type: treated}))
    result = ExperimentResult(
        config, eval_baseline, treated, table, index,
        [ex.task.id for ex in train], test_ids,
    )
    if out_dir is not None:
        _write_results(out_dir / "results.jsonl", eval_baseline + treated)
        (out_dir / "table.txt").write_text(table.render(), encoding="utf-8")
        (out_dir / "table.csv").write_text(table.to_csv(), encoding="utf-8")
        (out_dir / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        save_index(index, out_dir / "memory.jsonl")
    return result
