import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reflectmem import Example, LLMConfig, OutcomeLabel, Step, Task, Trajectory, task_key
from reflectmem.core import parse_task_key, read_dataset, write_dataset
from reflectmem.errors import CorruptRecord, EmptyTrajectory, IoFailure

from conftest import make_task, make_traj


@pytest.mark.parametrize(
    "start_url, intent, expected",
    [
        ("MAP", "Which US states border Illinois?", "Go to MAP, Which US states border Illinois?"),
        ("", "", "Go to , "),
        ("SHOP", "find mugs", "Go to SHOP, find mugs"),
    ],
)
def test_task_key(start_url, intent, expected):
    task = Task("x", "map", start_url, intent)
    assert task_key(task) == expected
    assert task.key_text == expected


def test_task_requires_id():
    with pytest.raises(ValueError):
        Task("", "map", "MAP", "x")


@given(st.text().filter(lambda s: ", " not in s), st.text())
def test_task_key_parses_back(start_url, intent):
    parsed = parse_task_key(task_key(Task("q", "", start_url, intent)))
    assert (parsed.start_url, parsed.intent) == (start_url, intent)


@given(st.sampled_from(list(OutcomeLabel)))
def test_outcome_label_round_trip(label):
    assert OutcomeLabel.from_reward(label.reward) is label


def test_outcome_from_reward():
    assert OutcomeLabel.from_reward(1) is OutcomeLabel.SUCCESS
    assert OutcomeLabel.from_reward(0) is OutcomeLabel.FAILURE
    with pytest.raises(ValueError):
        OutcomeLabel.from_reward(2)


def test_llm_config_defaults():
    cfg = LLMConfig()
    assert (cfg.temperature, cfg.top_p) == (0.0, 0.5)
    with pytest.raises(ValueError):
        LLMConfig(top_p=0.0)
    with pytest.raises(ValueError):
        LLMConfig(temperature=-1)


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory("t", (Step("o", "a"),), reward=2)
    with pytest.raises(ValueError):
        Trajectory("t", (Step("o", "a"),), reward=1, total_tokens=5, prompt_tokens=6)
    with pytest.raises(ValueError):
        Step("o", "")
    with pytest.raises(EmptyTrajectory):
        Trajectory("t", (), reward=0).require_steps()


def test_dataset_round_trip(tmp_path):
    data = [Example(make_task(f"t{i}"), make_traj(f"t{i}", reward=i % 2)) for i in range(3)]
    path = tmp_path / "d.jsonl"
    write_dataset(data, path)
    assert read_dataset(path) == data
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"task", "trajectory"}
    assert set(first["trajectory"]) == {"task_id", "steps", "reward", "wall_time_s", "total_tokens", "prompt_tokens"}


def test_dataset_errors(tmp_path):
    with pytest.raises(IoFailure, match="missing.jsonl"):
        read_dataset(tmp_path / "missing.jsonl")
    bad = tmp_path / "bad.jsonl"
    good = json.dumps(Example(make_task(), make_traj()).to_dict())
    bad.write_text(good + "\n" + good[:20] + "\n")
    with pytest.raises(CorruptRecord) as info:
        read_dataset(bad)
    assert info.value.line == 2
