import json

import pytest

from reflectmem import Task
from reflectmem.composer import ComposedPrompt
from reflectmem.core import KnowledgeType
from reflectmem.errors import ConfigError, NonPositiveBaseline, UnknownTask
from reflectmem.fixture import fixture_environment
from reflectmem.harness import (
    EnvTask,
    ExperimentConfig,
    RunResult,
    ScriptedAgent,
    ToyEnvironment,
    Trap,
    compute_cost_table,
    compute_success_split,
    group_by_subset,
    reduction_pct,
    run_episode,
    run_experiment,
    sr_gain_points,
)

TRAP = Trap("b", "jump", "c", "jump is broken", ("walk", "walk more"))


def small_env(max_steps=6):
    transitions = {("a", "go"): "b", ("a", "rest"): "e", ("b", "walk"): "b2", ("b2", "walk more"): "c"}
    tasks = [
        EnvTask(Task("easy", "s", "S", "reach e"), "a", "e", ("rest",)),
        EnvTask(Task("hard", "s", "S", "reach c"), "a", "c", ("go", "jump")),
    ]
    return ToyEnvironment(transitions, tasks, traps=[TRAP], max_steps=max_steps)


def prompt(text):
    return ComposedPrompt(text, 1, 0, KnowledgeType.WEB_REFLECTION)


def rr(success, base, steps=1, tokens=10, cond="x"):
    return RunResult("t", success, steps, tokens, tokens, 1.0, None, base, cond)


def test_task_without_trap_succeeds():
    res = run_episode(small_env(), ScriptedAgent(), "easy")
    assert res.success == 1 and res.steps == 1 and res.baseline_success == 1


def test_trap_fails_at_step_budget():
    res = run_episode(small_env(), ScriptedAgent(), "hard")
    assert res.success == 0 and res.steps == 6
    assert "Limitation: jump is broken" in res.trajectory.steps[-1].observation


def test_hint_in_prompt_avoids_trap():
    res = run_episode(small_env(), ScriptedAgent(), "hard", prompt("Tip: Jump is broken."),
                      condition="web_reflection", baseline_success=0)
    assert res.success == 1 and res.steps == 3
    assert [s.action for s in res.trajectory.steps] == ["go", "walk", "walk more"]


def test_unknown_task():
    with pytest.raises(UnknownTask):
        run_episode(small_env(), ScriptedAgent(), "nope")


def test_unreachable_goal_rejected():
    with pytest.raises(ValueError):
        small_env(max_steps=1)


def test_accounting_identity():
    res = run_episode(fixture_environment(), ScriptedAgent(), "gitlab_002")
    t = res.trajectory
    assert res.prompt_tokens <= res.total_tokens
    assert t.total_tokens == res.total_tokens and len(t.steps) == res.steps
    assert res.wall_time_s == pytest.approx(2.0 * res.steps + 0.001 * res.total_tokens)


def test_success_split_examples():
    results = [rr(1, 1), rr(1, 0), rr(0, 0), rr(1, 0)]
    s = compute_success_split(results)
    assert s.overall == 0.75 and s.prev_success == 1.0 and s.prev_fail == pytest.approx(2 / 3)
    s = compute_success_split([rr(1, 1), rr(0, 1)])
    assert s.prev_fail is None and s.prev_success == 0.5


def test_success_split_hand_counted():
    s = compute_success_split([rr(1, 1), rr(1, 0), rr(0, 1), rr(0, 0)])
    assert s == (0.5, 0.5, 0.5)


def test_success_split_by_memory_outcome():
    from dataclasses import replace

    results = [replace(rr(1, 0), memory_outcome="failure"), replace(rr(0, 1), memory_outcome="success"),
               rr(1, 1)]
    s = compute_success_split(results, by="memory")
    assert s == (pytest.approx(2 / 3), 0.0, 1.0)
    with pytest.raises(ValueError):
        compute_success_split(results, by="other")


def test_sr_gain_of_eleven_points():
    base = [rr(int(i < 50), int(i < 50)) for i in range(100)]
    treated = [rr(int(i < 61), int(i < 50)) for i in range(100)]
    assert sr_gain_points(base, treated) == pytest.approx(11.0)


def test_cost_table_means_and_absent_groups():
    results = [rr(1, 1, steps=4, tokens=100), rr(0, 1, steps=8, tokens=300)]
    table = compute_cost_table(group_by_subset({"baseline": results}))
    row = table.get("baseline")
    assert (row.steps, row.total_tokens, row.success_rate) == (6.0, 200.0, 0.5)
    neg = table.get("baseline", "negative_only")
    assert neg.n == 0 and neg.steps is None
    assert "negative_only" in table.render()


@pytest.mark.parametrize("base, treated, want", [
    (11.92, 10.08, 15.4), (14.94, 11.20, 25.0), (11.92, 8.45, 29.1), (14.94, 9.40, 37.1),
])
def test_step_reductions(base, treated, want):
    assert abs(reduction_pct(base, treated) - want) <= 0.05


def test_cost_table_single_and_pair():
    t = compute_cost_table({("a", "overall"): [rr(1, 1, steps=10)], ("b", "overall"): [rr(1, 1, steps=10), rr(1, 1, steps=12)]})
    assert t.get("a").steps == 10 and t.get("b").steps == 11.0


def test_accounting_identity_over_groups():
    res = [run_episode(fixture_environment(), ScriptedAgent(), t) for t in sorted(fixture_environment().tasks)]
    table = compute_cost_table(group_by_subset({"baseline": res}))
    for subset in ("overall", "positive_only", "negative_only"):
        row = table.get("baseline", subset)
        members = [r for r in res if subset == "overall" or r.baseline_success == (subset == "positive_only")]
        assert abs(row.total_tokens * row.n - sum(r.total_tokens for r in members)) < 1e-9
        assert abs(row.steps * row.n - sum(r.steps for r in members)) < 1e-9


def test_hints_shorten_every_trapped_fixture_task():
    env = fixture_environment()
    trapped = [t for t in sorted(env.tasks) if run_episode(env, ScriptedAgent(), t).success == 0]
    assert len(trapped) == 4
    for tid in trapped:
        et = env.get(tid)
        page, hint = et.start_page, None
        for action in et.plan:
            trap = env.trap_at(page, action)
            if trap:
                hint = trap.hint
                break
            page = env.transitions[(page, action)]
        naive = run_episode(env, ScriptedAgent(), tid)
        hinted = run_episode(env, ScriptedAgent(), tid, prompt(f"Limitation: {hint}."), baseline_success=0)
        assert hinted.steps < naive.steps and hinted.success == 1


def test_reduction_pct():
    assert reduction_pct(11.92, 10.08) == pytest.approx(15.436, abs=1e-3)
    with pytest.raises(NonPositiveBaseline):
        reduction_pct(0, 1)


@pytest.mark.parametrize("bad", [{"k": 0}, {"mode": "H3"}, {"train_fraction": 1.0}, {"knowledge_type": "x"}])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_config_unknown_key():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kk": 1})


def test_h2_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        run_experiment(ExperimentConfig(mode="H2", seed=0, out_dir=str(tmp_path / name)))
        outs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"results.jsonl", "table.txt", "table.csv", "summary.json", "memory.jsonl"}
    summary = json.loads(outs[0]["summary.json"])
    assert summary["n_eval"] == 2


def test_failure_writes_partial_results(tmp_path):
    cfg = ExperimentConfig(mode="H1", generator={"kind": "nope"}, out_dir=str(tmp_path))
    with pytest.raises(Exception):
        run_experiment(cfg)
    lines = (tmp_path / "results.partial.jsonl").read_text().splitlines()
    assert len(lines) == 12
