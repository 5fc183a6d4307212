"""Command-line entry point.

Subcommands cover the pipeline end to end: demonstration generation and
verification (demo, verify, dump), dataset building (build-datasets),
evaluation runs with environment forcing (evaluate), first-error
classification (classify), report rendering (report), and hosting the
oracle behind the wire protocol (serve-oracle).

Every command is non-interactive; usage errors exit 2, runtime failures
exit 1.  All randomness flows from --seed.  A --config file of key=value
lines can pre-set any flag of its subcommand; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import datasets as ds
from .demonstrate import DEFAULT_GLYPH, Variant, demonstrate, verify_demonstration
from .actions import parse_actions, ParseMode, serialize_actions
from .evaluation import (
    ReportRow,
    SessionRecord,
    classify_error,
    load_session_records,
    render_report,
    save_session_records,
    score,
    write_records_csv,
)
from .generators import NoiseGenerator, OracleGenerator
from .grid import Grid
from .actions import execute
from .harness import ForcingMode, MalformedPolicy, SessionConfig, run_session
from .protocol import GeneratorServer, connect, serve_stdio
from .questions import Problem, Template, encode_question, render_question

log = logging.getLogger(__name__)

ENV_DATA_DIR = "TEACH_DEMO_DATA_DIR"


class UsageError(ValueError):
    pass


def _require(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) in (None, [])]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join(f"--{n}" for n in missing))


def _problem_from_args(args) -> Problem:
    _require(args, "dividend", "divisor")
    template = Template.CALCULATE if getattr(args, "template", "whatis") == "calculate" else Template.WHAT_IS
    try:
        return Problem(args.dividend, args.divisor, template)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _variant(name: str) -> Variant:
    try:
        return Variant(name)
    except ValueError as exc:
        raise UsageError(f"unknown variant {name!r}") from exc


# -- commands ----------------------------------------------------------------


def cmd_demo(args) -> int:
    problem = _problem_from_args(args)
    demo = demonstrate(problem, _variant(args.variant), args.glyph)
    text = serialize_actions(list(demo.actions))
    if args.record:
        text = encode_question(render_question(problem)) + " | " + text
    print(text)
    return 0


def cmd_verify(args) -> int:
    problem = _problem_from_args(args)
    if args.transcript:
        tokens = Path(args.transcript).read_text(encoding="utf-8").split()
        result = parse_actions(tokens, ParseMode.TOLERANT)
        from .demonstrate import Demonstration

        demo = Demonstration(problem, _variant(args.variant), tuple(result.actions))
    else:
        demo = demonstrate(problem, _variant(args.variant), args.glyph)
    report = verify_demonstration(demo)
    print(f"look mismatches: {len(report.look_mismatches)}")
    print(f"final answer: {report.final_answer}")
    print(f"answer correct: {report.answer_correct}")
    for mm in report.look_mismatches[:20]:
        print(f"  ({mm.x},{mm.y}) {mm.kind.value}: recorded {mm.recorded!r}, environment {mm.expected!r}")
    return 0 if (report.answer_correct and not report.look_mismatches) else 1


def cmd_dump(args) -> int:
    problem = _problem_from_args(args)
    demo = demonstrate(problem, Variant.FULL, args.glyph)
    grid = Grid()
    for action in demo.actions:
        execute(action, grid)
    print(grid.dump())
    return 0


def cmd_build_datasets(args) -> int:
    _require(args, "out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan = ds.SplitPlan(
        train=args.train,
        validation=args.validation,
        test_mixed=args.test_mixed,
        test_interpolated=args.test_interpolated,
        rng_seed=args.seed,
    )
    data_dir = args.data_dir or os.environ.get(ENV_DATA_DIR)
    synthetic = data_dir is None
    if synthetic:
        log.info("no --data-dir given; generating synthetic pools")
        pools = ds.synth_pools(plan)
    else:
        pools = _load_pools(Path(data_dir))
    splits = ds.sample_splits(pools, plan)
    variant = _variant(args.variant)
    manifest = ds.build_training_file(
        splits.train, variant, out / f"train_{variant.value}.txt",
        marker=args.marker, seed=args.seed, synthetic=synthetic,
    )
    ds.write_qa_file(splits.validation, out / "validation.txt")
    ds.write_qa_file(splits.test_mixed, out / "test_mixed.txt")
    ds.write_qa_file(splits.test_interpolated, out / "test_interpolated.txt")
    print(f"train records: {manifest['records']} (sha256 {manifest['sha256'][:12]}...)")
    print(f"splits: validation {len(splits.validation)}, test_mixed {len(splits.test_mixed)}, "
          f"test_interpolated {len(splits.test_interpolated)}")
    return 0


def _load_pools(data_dir: Path) -> dict[ds.Source, list[ds.QAPair]]:
    if not data_dir.is_dir():
        raise UsageError(f"data dir {data_dir} does not exist")
    pools: dict[ds.Source, list[ds.QAPair]] = {}
    for source in ds.Source:
        candidates = [
            data_dir / source.value / "numbers__div_remainder.txt",
            data_dir / f"{source.value}.txt",
        ]
        path = next((p for p in candidates if p.exists()), None)
        if path is None:
            raise UsageError(f"no question file for {source.value} under {data_dir}")
        pools[source] = ds.load_qa_file(path, source)
    return pools


def _make_generator_factory(spec: str, seed: int, glyph: str):
    """Returns (factory, per_session).  per_session generators are opened
    and closed around every single session (one session per connection)."""
    if spec == "oracle":
        return (lambda: OracleGenerator(glyph)), False
    if spec.startswith("noise:"):
        parts = spec.split(":")
        try:
            p = float(parts[1])
        except (IndexError, ValueError) as exc:
            raise UsageError(f"bad noise spec {spec!r}; want noise:P[:look|write]") from exc
        mode = parts[2] if len(parts) > 2 else "look"
        if mode not in ("look", "write"):
            raise UsageError(f"bad noise mode {mode!r}")
        return (lambda: NoiseGenerator(OracleGenerator(glyph), p, mode, seed)), False
    if spec.startswith("remote:"):
        address = spec[len("remote:"):]
        return (lambda: connect(address)), True
    raise UsageError(f"unknown generator spec {spec!r}; want oracle, noise:P, or remote:ADDR")


def cmd_evaluate(args) -> int:
    _require(args, "generator", "questions", "out")
    questions_path = Path(args.questions)
    if not questions_path.exists():
        raise UsageError(f"questions file {questions_path} not found")
    pairs = ds.load_qa_file(questions_path, ds.Source.INTERPOLATED)
    if args.limit:
        pairs = pairs[: args.limit]
    config = SessionConfig(
        trim_tokens=args.trim_tokens,
        max_rounds=args.max_rounds,
        max_new_tokens=args.max_new_tokens,
        forcing_mode=ForcingMode(args.forcing),
        malformed_policy=MalformedPolicy(args.malformed),
    )
    factory, per_session = _make_generator_factory(args.generator, args.seed, args.glyph)
    local = threading.local()

    def run_one(indexed) -> SessionRecord:
        i, qa = indexed
        problem = qa.problem
        if per_session:
            generator = factory()
        else:
            if not hasattr(local, "generator"):
                local.generator = factory()
            generator = local.generator
        try:
            session = run_session(generator, problem, config, session_id=f"s{i:05d}")
        finally:
            if per_session:
                generator.close()
        return SessionRecord.from_session(session, args.generator, qa.question)

    items = list(enumerate(pairs))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(run_one, items))
    else:
        records = [run_one(item) for item in items]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_session_records(records, out)
    write_records_csv(records, out / "report.csv")
    accuracy = score(records)
    summary = {
        "generator": args.generator,
        "questions": str(questions_path),
        "test_set": questions_path.stem,
        "variant": args.generator,
        "total": len(records),
        "correct": sum(r.correct for r in records),
        "accuracy": accuracy,
        "checkpoint": None,
        "seed": args.seed,
        "forcing_events": sum(r.forcing_events for r in records),
        "by_status": {
            status: sum(1 for r in records if r.status == status)
            for status in sorted({r.status for r in records})
        },
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"accuracy: {accuracy:.3f} ({summary['correct']}/{summary['total']})")
    return 0


def cmd_classify(args) -> int:
    _require(args, "sessions")
    in_dir = Path(args.sessions)
    records = load_session_records(in_dir)
    counts: dict[str, int] = {}
    for record in records:
        if record.correct:
            continue
        record.category = classify_error(record).value
        counts[record.category] = counts.get(record.category, 0) + 1
    save_session_records(records, in_dir)
    write_records_csv(records, in_dir / "report.csv")
    for category in sorted(counts):
        print(f"{category}: {counts[category]}")
    print(f"incorrect sessions classified: {sum(counts.values())}")
    return 0


def cmd_report(args) -> int:
    if not args.inputs:
        raise UsageError("missing required flag: --in")
    rows = []
    for path in args.inputs:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        for entry in data if isinstance(data, list) else [data]:
            rows.append(
                ReportRow(
                    variant=str(entry.get("variant", "?")),
                    test_set=str(entry.get("test_set", "?")),
                    accuracy=float(entry["accuracy"]),
                    checkpoint=entry.get("checkpoint"),
                )
            )
    document = render_report(rows, args.format)
    if args.out:
        Path(args.out).write_text(document, encoding="utf-8")
    else:
        print(document, end="")
    return 0


def cmd_serve_oracle(args) -> int:
    _require(args, "listen")
    if args.listen == "stdio":
        serve_stdio(lambda: OracleGenerator(args.glyph))
        return 0
    server = GeneratorServer(args.listen, lambda: OracleGenerator(args.glyph), parallel=True)
    print(f"listening on {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


# -- argument plumbing --------------------------------------------------------


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dividend", type=int)
    p.add_argument("--divisor", type=int)
    p.add_argument("--template", choices=("whatis", "calculate"), default="whatis")
    p.add_argument("--glyph", default=DEFAULT_GLYPH, help="division-sign character")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="longhand", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="print the demonstration for one problem")
    _add_problem_flags(p)
    p.add_argument("--variant", default="full", help="full|writelook|writeonly|answer")
    p.add_argument("--record", action="store_true", help="prepend the encoded question")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("verify", help="replay a demonstration and check it")
    _add_problem_flags(p)
    p.add_argument("--variant", default="full")
    p.add_argument("--transcript", help="verify this action text instead of a generated one")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dump", help="print the final grid state for one problem")
    _add_problem_flags(p)
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("build-datasets", help="sample splits and emit training/test files")
    p.add_argument("--data-dir", help=f"question files; defaults to ${ENV_DATA_DIR}, else synthetic")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", default="full")
    p.add_argument("--marker", default=ds.DEFAULT_MARKER)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--validation", type=int, default=100)
    p.add_argument("--test-mixed", type=int, default=500)
    p.add_argument("--test-interpolated", type=int, default=500)
    p.set_defaults(func=cmd_build_datasets)

    p = sub.add_parser("evaluate", help="run a generator over questions with forcing")
    p.add_argument("--generator", help="oracle | noise:P[:look|write] | remote:ADDR")
    p.add_argument("--questions", help="file of alternating question/answer lines")
    p.add_argument("--out", help="directory for session logs and reports")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--limit", type=int, default=0, help="evaluate only the first N questions")
    p.add_argument("--trim-tokens", type=int, default=500)
    p.add_argument("--max-rounds", type=int, default=25)
    p.add_argument("--max-new-tokens", type=int, default=1024)
    p.add_argument("--forcing", choices=("lazy", "eager"), default="lazy")
    p.add_argument("--malformed", choices=("skiplog", "abort"), default="skiplog")
    p.add_argument("--glyph", default=DEFAULT_GLYPH)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="categorize the first error of incorrect sessions")
    p.add_argument("--sessions", help="directory written by evaluate")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="render accuracy tables from summary files")
    p.add_argument("--in", dest="inputs", nargs="+")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve-oracle", help="host the oracle behind the wire protocol")
    p.add_argument("--listen", help="tcp:HOST:PORT or stdio")
    p.add_argument("--glyph", default=DEFAULT_GLYPH)
    p.set_defaults(func=cmd_serve_oracle)

    for sp in sub.choices.values():
        sp.add_argument("--config", help="key=value file of flag defaults; flags win")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pre-read --config and install its values as parser defaults."""
    if "--config" not in argv:
        return argv
    path = argv[argv.index("--config") + 1]
    defaults = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        defaults[key.strip().replace("-", "_")] = value.strip()
    for sp in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        known = {a.dest: a for a in sp._actions}
        coerced = {}
        for key, value in defaults.items():
            if key in known:
                typ = known[key].type
                coerced[key] = typ(value) if callable(typ) else value
        sp.set_defaults(**coerced)
    return argv


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("LONGHAND_LOG", "WARNING"))
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as exc:
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
