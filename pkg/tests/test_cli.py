import json

import pytest

from reflectmem.cli import main


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "data.jsonl"
    assert main(["fixture", "--output", str(path)]) == 0
    return path


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_build_retrieve_compose(tmp_path, dataset, capsys):
    idx = tmp_path / "mem.jsonl"
    code, out, _ = run(capsys, ["build", "--dataset", str(dataset), "--output", str(idx)])
    assert code == 0 and json.loads(out)["records"] == 12
    key = "Go to MAP, Which US states border Illinois?"
    code, out, _ = run(capsys, ["retrieve", "--index", str(idx), "--task-key", key, "-k", "3"])
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 3 and json.loads(lines[0])["record"]["task_id"] == "map_002"
    res = tmp_path / "res.jsonl"
    res.write_text(out)
    code, out, _ = run(capsys, ["compose", "--results", str(res), "--task-key", key, "--pretty"])
    assert code == 0 and out.count("Key Learnings:") == 3
    assert out.endswith("OBJECTIVE:\nWhich US states border Illinois?\n")


def test_build_is_deterministic(tmp_path, dataset, capsys):
    for name in ("a", "b"):
        assert main(["build", "--dataset", str(dataset), "--output", str(tmp_path / name)]) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_k_zero_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["retrieve", "--index", "x", "--task-key", "q", "-k", "0"])
    assert info.value.code == 2


def test_missing_index_is_runtime_error(tmp_path, capsys):
    code, _, err = run(capsys, ["retrieve", "--index", str(tmp_path / "nope"), "--task-key", "q"])
    assert code == 1 and "error" in err


def test_missing_required_option_is_usage_error(capsys):
    code, _, _ = run(capsys, ["build"])
    assert code == 2


def test_config_file_and_bad_k(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"index": "x", "k": 0}))
    code, _, _ = run(capsys, ["retrieve", "--config", str(cfg), "--task-key", "q"])
    assert code == 2


def test_compose_mixed_types_fails(tmp_path, dataset, capsys):
    lines = []
    for kind in ("summary", "web_reflection"):
        idx = tmp_path / f"{kind}.jsonl"
        main(["build", "--dataset", str(dataset), "--output", str(idx), "--knowledge-type", kind])
        main(["retrieve", "--index", str(idx), "--task-key", "Go to SHOP, mugs", "-k", "1"])
        lines.append(capsys.readouterr().out.splitlines()[-1])
    res = tmp_path / "mixed.jsonl"
    res.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, ["compose", "--results", str(res), "--task-key", "Go to SHOP, x"])
    assert code == 1 and "expected" in err


def test_eval_and_analyze(tmp_path, capsys):
    code, out, _ = run(capsys, ["eval", "--mode", "H1", "-k", "5"])
    summary = json.loads(out)
    assert code == 0 and summary["sr_gain_points"] > 0
    code, out, _ = run(capsys, ["analyze", "--csv", str(tmp_path / "m.csv")])
    assert code == 0 and json.loads(out)["margin"] > 0
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert all(float(r.split(",")[i]) == 1.0 for i, r in enumerate(rows[1:], start=1))
