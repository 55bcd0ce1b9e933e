"""Operator-facing CLI: ingest, run, curve, stats, and triage subcommands.

Configuration comes from an optional TOML file plus flags; flags win.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime/reader error.
"""
from __future__ import annotations

import argparse
import itertools
import json
import socket
import statistics
import sys
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import evalstats, executor, ingest, qdmr, readers, triage
from .strategy import RenderOptions, StrategyKind, UnknownStrategy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

DEFAULT_SEEDS = (0, 1, 2)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we own the exit codes
        raise UsageError(message)


def build_reader(spec: str, seed: int = 0):
    """Construct a reader from a spec string.

    Forms: lexical | scripted:<path> | http:<url> | noisy:<base>:<p>:<mode>
    """
    if spec == "lexical":
        return readers.LexicalReader()
    if spec.startswith("scripted:"):
        return readers.ScriptedReader.from_file(spec[len("scripted:") :])
    if spec.startswith("noisy:"):
        rest = spec[len("noisy:") :]
        try:
            base_spec, p, mode = rest.rsplit(":", 2)
            noise = readers.NoiseSpec(error_probability=float(p), corruption_mode=mode, seed=seed)
        except ValueError as exc:
            raise UsageError(f"bad noisy reader spec {spec!r}: {exc}") from exc
        return readers.corrupt(build_reader(base_spec, seed), noise)
    if spec.startswith(("http:", "https:")):
        url = spec
        if spec.startswith("http:") and not spec[5:].startswith("//"):
            url = spec[5:]  # "http:<url>" wrapper form
        if "://" not in url:
            url = "http://" + url
        return readers.HttpReader(url)
    raise UsageError(f"unknown reader spec {spec!r}; expected lexical | scripted:<path> | http:<url> | noisy:<base>:<p>:<mode>")


def load_config(path: str | None, section: str) -> dict:
    if not path:
        return {}
    with open(path, "rb") as f:
        config = tomllib.load(f)
    merged = {k: v for k, v in config.items() if not isinstance(v, dict)}
    merged.update(config.get(section, {}))
    return merged


def _setting(args_value, config: dict, key: str, default=None):
    if args_value is not None:
        return args_value
    return config.get(key, default)


def _parse_seeds(value) -> list[int]:
    if value is None:
        return list(DEFAULT_SEEDS)
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


def _parse_sizes(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


def _render_options(args, config: dict) -> RenderOptions:
    return RenderOptions(
        block_separator=_setting(getattr(args, "block_separator", None), config, "block_separator", "\n"),
        token_separator=_setting(getattr(args, "token_separator", None), config, "token_separator", " "),
        context_budget=int(_setting(getattr(args, "context_budget", None), config, "context_budget", 12000)),
    )


def cmd_ingest(args) -> int:
    break_rows = ingest.load_break(args.break_path)
    hotpot_map = ingest.load_hotpot(args.hotpot, args.gold_paragraphs_only) if args.hotpot else {}
    drop_map = ingest.load_drop(args.drop) if args.drop else {}
    instances, diagnostics = ingest.join_instances(break_rows, hotpot_map, drop_map)
    ingest.write_instances(args.out, instances)
    unmatched = sum(1 for d in diagnostics if d.kind == "unmatched")
    invalid = len(diagnostics) - unmatched
    print(f"ingest: {len(instances)} instances, {unmatched} unmatched, {invalid} invalid -> {args.out}")
    for diagnostic in diagnostics:
        print(f"  [{diagnostic.kind}] {diagnostic.question_id}: {diagnostic.message}")
    return EXIT_OK if instances else EXIT_DATA


def cmd_run(args) -> int:
    config = load_config(args.config, "run")
    instances_path = _setting(args.instances, config, "instances")
    strategy_name = _setting(args.strategy, config, "strategy")
    reader_spec = _setting(args.reader, config, "reader")
    if not instances_path or not strategy_name or not reader_spec:
        raise UsageError("run needs --instances, --strategy, and --reader (flags or config)")
    strategy = StrategyKind.from_name(strategy_name)
    seeds = _parse_seeds(_setting(args.seeds, config, "seeds"))
    parallelism = int(_setting(args.parallelism, config, "parallelism", 1))
    out_dir = Path(_setting(args.out_dir, config, "out_dir", "runs"))
    options = _render_options(args, config)

    readers_by_seed = {seed: build_reader(reader_spec, seed) for seed in seeds}
    instances = ingest.read_instances(instances_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_traces = []
    for seed in seeds:
        traces = executor.run_dataset(instances, strategy, readers_by_seed[seed], parallelism=parallelism, seed=seed)
        trace_path = out_dir / f"traces_{strategy.value}_seed{seed}.jsonl"
        executor.write_traces(trace_path, traces)
        print(f"run: wrote {len(traces)} traces -> {trace_path}")
        all_traces.extend(traces)

    summary = evalstats.summarize(all_traces)
    record = {"strategy": strategy.value, **summary.to_dict()}
    with open(out_dir / "summary.json", "w", encoding="utf-8") as f:
        f.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(out_dir / "summary.csv", "w", encoding="utf-8") as f:
        f.write(evalstats.SUMMARY_CSV_HEADER + "\n")
        f.write(evalstats.summary_csv_row(strategy.value, summary) + "\n")
    print(
        f"run: strategy={strategy.value} n={summary.n} failed={summary.n_failed} "
        f"em={summary.em_mean:.4f}±{summary.em_std:.4f} f1={summary.f1_mean:.4f} over {summary.n_seeds} seed(s)"
    )
    return EXIT_OK


def cmd_curve(args) -> int:
    config = load_config(args.config, "curve")
    train_path = _setting(args.instances, config, "instances")
    eval_path = _setting(args.eval, config, "eval")
    readers_manifest = _setting(args.readers, config, "readers")
    zero_shot_spec = _setting(args.zero_shot_reader, config, "zero_shot_reader")
    if not train_path or not eval_path or not readers_manifest or not zero_shot_spec:
        raise UsageError("curve needs --instances, --eval, --readers, and --zero-shot-reader")
    sizes = _parse_sizes(_setting(args.sizes, config, "sizes", "10,25,50,100,250,500,1000"))
    if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise UsageError(f"sizes must be strictly ascending, got {sizes}")
    seeds = _parse_seeds(_setting(args.seeds, config, "seeds"))
    strategy = StrategyKind.from_name(_setting(args.strategy, config, "strategy", "no_decomp"))
    parallelism = int(_setting(args.parallelism, config, "parallelism", 1))
    out_dir = Path(_setting(args.out_dir, config, "out_dir", "curve"))

    if isinstance(readers_manifest, dict):
        manifest = readers_manifest
    else:
        with open(readers_manifest, "rb") as f:
            manifest = tomllib.load(f) if str(readers_manifest).endswith(".toml") else json.load(f)
        manifest = manifest.get("readers", manifest)
    try:
        reader_factory = {size: build_reader(manifest[str(size)]) for size in sizes}
    except KeyError as exc:
        raise UsageError(f"reader manifest has no entry for size {exc}") from exc

    train_instances = ingest.read_instances(train_path)
    eval_instances = ingest.read_instances(eval_path)
    result = evalstats.learning_curve(
        train_instances,
        sizes,
        seeds,
        strategy,
        reader_factory,
        build_reader(zero_shot_spec),
        eval_instances,
        parallelism=parallelism,
        subset_dir=out_dir / "subsets",
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "curve.jsonl", "w", encoding="utf-8") as f:
        for point in list(result.points) + list(result.baseline):
            f.write(json.dumps(point.to_dict(), ensure_ascii=False) + "\n")
    zero_shot_em = statistics.mean(p.em for p in result.baseline)
    report = {"crossover": result.crossover, "zero_shot_em": zero_shot_em, "sizes": sizes}
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        f.write(json.dumps(report, ensure_ascii=False) + "\n")
    print(f"curve: zero-shot em={zero_shot_em:.4f}, crossover size={result.crossover}")
    return EXIT_OK


def _load_trace_set(spec: str) -> tuple[str, list]:
    paths = [p for p in spec.split(",") if p]
    traces = []
    for path in paths:
        traces.extend(executor.read_traces(path))
    if not traces:
        raise evalstats.NoScorableTraces(f"trace set {spec!r} is empty")
    strategies = {t.strategy.value for t in traces}
    label = strategies.pop() if len(strategies) == 1 else Path(paths[0]).stem
    return label, traces


def cmd_stats(args) -> int:
    sets = []
    for spec in args.traces:
        label, traces = _load_trace_set(spec)
        summary = evalstats.summarize(traces)
        if summary.n_seeds < 2:
            raise evalstats.DegenerateSample(
                f"trace set {label!r} has {summary.n_seeds} seed(s); need >= 2 for a t-test"
            )
        sets.append((label, [row[1] for row in summary.per_seed]))

    if len(sets) < 2:
        raise UsageError("stats needs at least 2 trace sets")
    labels = [label for label, _ in sets]
    if args.baseline:
        if args.baseline not in labels:
            raise UsageError(f"--baseline {args.baseline!r} is not among trace sets {labels}")
        base = labels.index(args.baseline)
        pairs = [(base, i) for i in range(len(sets)) if i != base]
    else:
        pairs = list(itertools.combinations(range(len(sets)), 2))

    results = [
        evalstats.welch_t(sets[a][1], sets[b][1], pair=(labels[a], labels[b])) for a, b in pairs
    ]
    decisions = evalstats.bonferroni([r.p_value for r in results], args.alpha)
    threshold = args.alpha / len(results)
    for result, decision in zip(results, decisions):
        result.significant_at = threshold
        result.decision = decision

    header = f"{'pair':40s} {'t':>9s} {'df':>7s} {'p':>9s} {'sig@' + format(threshold, '.5f'):>12s}"
    print(header)
    for r in results:
        print(
            f"{r.pair[0] + ' vs ' + r.pair[1]:40s} {r.t:9.4f} {r.df:7.2f} {r.p_value:9.4f} {str(r.decision):>12s}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("a,b,t,df,p_value,threshold,significant\n")
            for r in results:
                f.write(
                    f"{r.pair[0]},{r.pair[1]},{r.t:.6f},{r.df:.6f},{r.p_value:.6f},{threshold:.6f},{r.decision}\n"
                )
    return EXIT_OK


def cmd_triage_serve(args) -> int:
    import uvicorn

    traces = executor.read_traces(args.traces)
    instances = ingest.read_instances(args.instances) if args.instances else None
    log = triage.AnnotationLog(args.annotations)
    app = triage.build_app(traces, log, instances=instances, ui_dir=args.ui_dir)
    with socket.socket() as probe:  # fail fast with our exit code when the port is taken
        try:
            probe.bind((args.host, args.port))
        except OSError as exc:
            raise RuntimeError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_triage_summary(args) -> int:
    annotations = triage.read_annotations(args.annotations) if Path(args.annotations).exists() else []
    summary = triage.summarize_errors(annotations).to_dict()
    print(f"annotations: {summary['total']}")
    for name, entry in summary["categories"].items():
        print(f"  {name:20s} {entry['count']:4d}  {entry['percent']}%")
    return EXIT_OK


def make_parser() -> _Parser:
    parser = _Parser(prog="decompqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_ingest = sub.add_parser("ingest", help="join BREAK rows with HotpotQA/DROP sources")
    p_ingest.add_argument("--break", dest="break_path", required=True, help="BREAK CSV path")
    p_ingest.add_argument("--hotpot", help="HotpotQA JSON path")
    p_ingest.add_argument("--drop", help="DROP JSON path")
    p_ingest.add_argument("--out", required=True, help="output instances.jsonl")
    p_ingest.add_argument("--gold-paragraphs-only", action="store_true")
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", help="execute instances under one strategy")
    p_run.add_argument("--config")
    p_run.add_argument("--instances")
    p_run.add_argument("--strategy")
    p_run.add_argument("--reader")
    p_run.add_argument("--seeds")
    p_run.add_argument("--parallelism", type=int)
    p_run.add_argument("--out-dir")
    p_run.add_argument("--block-separator")
    p_run.add_argument("--token-separator")
    p_run.add_argument("--context-budget", type=int)
    p_run.set_defaults(func=cmd_run)

    p_curve = sub.add_parser("curve", help="learning-curve size experiment")
    p_curve.add_argument("--config")
    p_curve.add_argument("--instances", help="training pool instances.jsonl")
    p_curve.add_argument("--eval", help="fixed evaluation split instances.jsonl")
    p_curve.add_argument("--sizes")
    p_curve.add_argument("--seeds")
    p_curve.add_argument("--strategy")
    p_curve.add_argument("--readers", help="manifest mapping size -> reader spec (json or toml)")
    p_curve.add_argument("--zero-shot-reader")
    p_curve.add_argument("--parallelism", type=int)
    p_curve.add_argument("--out-dir")
    p_curve.set_defaults(func=cmd_curve)

    p_stats = sub.add_parser("stats", help="pairwise significance tests over trace sets")
    p_stats.add_argument("--traces", nargs="+", required=True, help="trace sets (comma-joined files)")
    p_stats.add_argument("--alpha", type=float, default=0.05)
    p_stats.add_argument("--correction", choices=["bonferroni"], default="bonferroni")
    p_stats.add_argument("--baseline", help="compare this set against every other")
    p_stats.add_argument("--out", help="CSV output path")
    p_stats.set_defaults(func=cmd_stats)

    p_triage = sub.add_parser("triage", help="error-annotation server and summaries")
    triage_sub = p_triage.add_subparsers(dest="triage_command", required=True, parser_class=_Parser)
    p_serve = triage_sub.add_parser("serve")
    p_serve.add_argument("--traces", required=True)
    p_serve.add_argument("--annotations", required=True)
    p_serve.add_argument("--instances", help="instances.jsonl for context/decomposition display")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.add_argument("--ui-dir", help="static UI assets to mount at /")
    p_serve.set_defaults(func=cmd_triage_serve)
    p_summary = triage_sub.add_parser("summary")
    p_summary.add_argument("--annotations", required=True)
    p_summary.set_defaults(func=cmd_triage_summary)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, UnknownStrategy) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        ingest.IngestError,
        qdmr.DecompositionError,
        evalstats.NoScorableTraces,
        evalstats.SizeExceedsCorpus,
        evalstats.DegenerateSample,
        triage.NoAnnotations,
        json.JSONDecodeError,
        OSError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (readers.ReaderError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
