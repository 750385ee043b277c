"""Command-line interface: ``reflectmem {build,retrieve,compose,eval,analyze,fixture}``.

Exit codes: 0 success, 1 runtime error, 2 usage or config error.
Data goes to stdout (or files); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .composer import compose_prompt
from .core import Example, KnowledgeType, Task, parse_task_key, read_dataset, write_dataset
from .errors import ConfigError, IoFailure, ReflectMemError
from .fixture import fixture_environment, fixture_tasks
from .harness import ExperimentConfig, ScriptedAgent, run_episode, run_experiment
from .memory import OutcomeFilter, RetrievalResult, build_memory, load_index, retrieve, save_index
from .providers import make_embedder, make_generator
from .similarity import category_separation, matrix_to_csv, pairwise_matrix, stats_json

logger = logging.getLogger("reflectmem")

KNOWLEDGE_CHOICES = [t.value for t in KnowledgeType]
FILTER_CHOICES = [f.value for f in OutcomeFilter]


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; explicit flags override its keys")
    common.add_argument("--pretty", action="store_true", help="human-readable output")
    common.add_argument("--jobs", type=positive_int, help="worker bound for provider calls and episodes")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def _provider_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("embedding provider (API key: $REFLECTMEM_EMBED_API_KEY)")
    g.add_argument("--embedder", choices=["hashing", "remote"])
    g.add_argument("--embed-dim", type=positive_int)
    g.add_argument("--embed-url")
    g.add_argument("--embed-model")
    g.add_argument("--embed-timeout", type=float)
    g.add_argument("--embed-batch-size", type=positive_int)
    g = p.add_argument_group("generation provider (API key: $REFLECTMEM_GEN_API_KEY)")
    g.add_argument("--generator", choices=["heuristic", "echo", "remote"])
    g.add_argument("--gen-url")
    g.add_argument("--gen-model")
    g.add_argument("--gen-timeout", type=float)
    g.add_argument("--temperature", type=float)
    g.add_argument("--top-p", type=float)
    return p


def _task_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--task-key", help='query text, e.g. "Go to MAP, Which US states border Illinois?"')
    src.add_argument("--task-file", type=Path, help="JSON file holding one task object")
    return p


def build_parser() -> argparse.ArgumentParser:
    common, providers, task = _common_parser(), _provider_parser(), _task_parser()
    parser = argparse.ArgumentParser(prog="reflectmem", description="Reflection memory for web agents.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common, providers], help="build a memory index from a dataset")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--knowledge-type", choices=KNOWLEDGE_CHOICES)
    p.add_argument("--filter", dest="outcome_filter", choices=FILTER_CHOICES)
    p.add_argument("--output", type=Path)
    p.add_argument("--on-error", choices=["raise", "skip"])
    p.add_argument("--step-cap", type=positive_int)
    p.add_argument("--obs-char-cap", type=positive_int)

    p = sub.add_parser("retrieve", parents=[common, providers, task], help="top-k records for a task")
    p.add_argument("--index", type=Path)
    p.add_argument("-k", type=positive_int)
    p.add_argument("--exclude-self", action="store_true", default=None)

    p = sub.add_parser("compose", parents=[common, task], help="compose a prompt from retrieval results")
    p.add_argument("--results", type=Path, required=True, help="JSON lines from `retrieve` ('-' for stdin)")
    p.add_argument("--knowledge-type", choices=KNOWLEDGE_CHOICES)
    p.add_argument("--max-tokens", type=positive_int)

    p = sub.add_parser("eval", parents=[common, providers], help="run the offline experiment on the fixture")
    p.add_argument("--mode", choices=["H1", "H2"])
    p.add_argument("--knowledge-type", choices=KNOWLEDGE_CHOICES)
    p.add_argument("--filter", dest="outcome_filter", choices=FILTER_CHOICES)
    p.add_argument("-k", type=positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--exclude-self", action="store_true", default=None)
    p.add_argument("--max-prompt-tokens", type=positive_int)
    p.add_argument("--out", dest="out_dir", type=Path)

    p = sub.add_parser("analyze", parents=[common, providers], help="pairwise similarity and site separation")
    p.add_argument("--dataset", type=Path, help="dataset file; defaults to the bundled fixture tasks")
    p.add_argument("--csv", type=Path, help="write the matrix here instead of stdout")
    p.add_argument("--stats", type=Path, help="write the stats JSON here")

    p = sub.add_parser("fixture", parents=[common], help="write baseline rollouts of the fixture as a dataset")
    p.add_argument("--output", type=Path, required=True)
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _pick(args, config: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _provider_specs(args, config: dict) -> tuple[dict, dict]:
    emb = dict(config.get("embedder") or {"kind": "hashing"})
    for flag, key in [("embedder", "kind"), ("embed_dim", "dim"), ("embed_url", "base_url"),
                      ("embed_model", "model"), ("embed_timeout", "timeout_s"), ("embed_batch_size", "batch_size")]:
        if getattr(args, flag, None) is not None:
            emb[key] = getattr(args, flag)
    gen = dict(config.get("generator") or {"kind": "heuristic"})
    for flag, key in [("generator", "kind"), ("gen_url", "base_url"), ("gen_model", "model"),
                      ("gen_timeout", "timeout_s"), ("temperature", "temperature"), ("top_p", "top_p")]:
        if getattr(args, flag, None) is not None:
            gen[key] = getattr(args, flag)
    jobs = _pick(args, config, "jobs")
    if jobs is not None and emb.get("kind") == "remote":
        emb.setdefault("max_parallel", jobs)
    return emb, gen


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required (as a flag or config key)")
    return value


def _read_task(args) -> Task:
    if args.task_file is not None:
        try:
            return Task.from_dict(json.loads(args.task_file.read_text(encoding="utf-8")))
        except OSError as exc:
            raise IoFailure(f"cannot read task file {args.task_file}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad task file {args.task_file}: {exc}") from exc
    return parse_task_key(args.task_key)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_build(args, config: dict) -> int:
    dataset = _require(_pick(args, config, "dataset"), "--dataset")
    output = _require(_pick(args, config, "output"), "--output")
    emb_spec, gen_spec = _provider_specs(args, config)
    examples = read_dataset(dataset)
    index = build_memory(
        examples,
        _pick(args, config, "knowledge_type", KnowledgeType.WEB_REFLECTION.value),
        _pick(args, config, "outcome_filter", OutcomeFilter.ALL.value),
        make_generator(gen_spec),
        make_embedder(emb_spec),
        on_error=_pick(args, config, "on_error", "raise"),
        n_jobs=_pick(args, config, "jobs", 4),
        step_cap=_pick(args, config, "step_cap", 10),
        obs_char_cap=_pick(args, config, "obs_char_cap", 2000),
    )
    save_index(index, output)
    for task_id in index.skipped:
        print(f"skipped: {task_id}", file=sys.stderr)
    if args.pretty:
        _emit(f"wrote {len(index)} records to {output} ({len(index.skipped)} skipped)")
    else:
        _emit(json.dumps({"records": len(index), "skipped": list(index.skipped), "output": str(output)}))
    return 0


def cmd_retrieve(args, config: dict) -> int:
    index_path = _require(_pick(args, config, "index"), "--index")
    k = _pick(args, config, "k", 5)
    if not isinstance(k, int) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    emb_spec, _ = _provider_specs(args, config)
    index = load_index(index_path)
    if args.task_file is not None:
        query = _read_task(args)
    else:
        query = args.task_key
    results = retrieve(
        index, query, k, make_embedder(emb_spec), exclude_self=bool(_pick(args, config, "exclude_self", False))
    )
    for r in results:
        if args.pretty:
            first = r.record.content.splitlines()[0] if r.record.content else ""
            _emit(f"{r.rank:>2}  {r.score:.4f}  {r.record.task_id}  [{r.record.outcome.value}]  {first[:80]}")
        else:
            _emit(json.dumps(r.to_dict(), sort_keys=True))
    return 0


def cmd_compose(args, config: dict) -> int:
    try:
        raw = sys.stdin.read() if str(args.results) == "-" else args.results.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read results {args.results}: {exc}") from exc
    try:
        results = [RetrievalResult.from_dict(json.loads(line)) for line in raw.splitlines() if line.strip()]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ReflectMemError(f"bad results file {args.results}: {exc}") from exc
    kt = _pick(args, config, "knowledge_type")
    if kt is None:
        kt = results[0].record.knowledge_type if results else KnowledgeType.WEB_REFLECTION
    prompt = compose_prompt(_read_task(args), results, kt, max_tokens=_pick(args, config, "max_tokens"))
    if args.pretty:
        sys.stdout.write(prompt.text)
    else:
        _emit(json.dumps({
            "text": prompt.text,
            "knowledge_count": prompt.knowledge_count,
            "estimated_tokens": prompt.estimated_tokens,
            "knowledge_type": prompt.knowledge_type.value,
        }, sort_keys=True))
    return 0


def cmd_eval(args, config: dict) -> int:
    emb_spec, gen_spec = _provider_specs(args, config)
    merged = {k: v for k, v in config.items() if k in ExperimentConfig.__dataclass_fields__}
    for name in ("mode", "knowledge_type", "outcome_filter", "k", "seed", "train_fraction",
                 "exclude_self", "max_prompt_tokens", "jobs", "out_dir"):
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = str(value) if name == "out_dir" else value
    merged["embedder"], merged["generator"] = emb_spec, gen_spec
    result = run_experiment(ExperimentConfig.from_dict(merged))
    if args.pretty:
        sys.stdout.write(result.table.render())
        s = result.summary()
        _emit(f"SR gain: {s['sr_gain_points']:+.1f} points; steps reduced by {s['step_reduction_pct']:.1f}%")
    else:
        _emit(json.dumps(result.summary(), sort_keys=True))
    return 0


def cmd_analyze(args, config: dict) -> int:
    emb_spec, _ = _provider_specs(args, config)
    dataset = _pick(args, config, "dataset")
    tasks = [ex.task for ex in read_dataset(dataset)] if dataset else fixture_tasks()
    matrix = pairwise_matrix(tasks, make_embedder(emb_spec))
    labels = [t.site for t in tasks]
    stats = stats_json(category_separation(matrix, labels), labels) + "\n"
    table = matrix_to_csv(matrix, [t.id for t in tasks])
    if args.csv is not None:
        args.csv.write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    if args.stats is not None:
        args.stats.write_text(stats, encoding="utf-8")
    elif args.csv is not None:
        sys.stdout.write(stats)
    return 0


def cmd_fixture(args, config: dict) -> int:
    env = fixture_environment()
    agent = ScriptedAgent()
    examples = []
    for tid in sorted(env.tasks):
        res = run_episode(env, agent, tid)
        examples.append(Example(env.get(tid).task, res.trajectory))
    write_dataset(examples, args.output)
    _emit(json.dumps({"tasks": len(examples), "output": str(args.output)}))
    return 0


COMMANDS = {
    "build": cmd_build,
    "retrieve": cmd_retrieve,
    "compose": cmd_compose,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "fixture": cmd_fixture,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _load_config(args.config)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"reflectmem {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (ReflectMemError, OSError, ValueError) as exc:
        print(f"reflectmem {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
