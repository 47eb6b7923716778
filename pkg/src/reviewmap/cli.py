"""Headless drivers over the session core.

``run`` screens a corpus end to end and writes the report; ``eval`` adds
screening metrics against a gold CSV; ``compare`` runs the multi- vs
single-agent harness on synthetic corpora; ``serve`` exposes the HTTP API.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .metrics import compare_partitioning, screening_metrics
from .session import Session, SessionConfig
from .synthetic import make_fixture_corpus


def _provider_config(args: argparse.Namespace) -> dict:
    if args.provider == "mock":
        return {"provider": "mock"}
    return {
        "provider": "http",
        "endpoint": args.endpoint or os.environ.get("REVIEWMAP_ENDPOINT", ""),
        "model": args.model or os.environ.get("REVIEWMAP_MODEL", ""),
        "api_key": os.environ.get("REVIEWMAP_API_KEY", ""),
    }


def _run_session(args: argparse.Namespace) -> Session:
    config = SessionConfig(
        research_question=args.question,
        detailed_focus=args.focus,
        inclusion_exclusion_criteria=args.criteria,
        summarization_requirement=args.summarization,
        seed=args.seed,
        read_budget=args.budget,
        k_override=args.k,
        provider=_provider_config(args),
    )
    directory = Path(args.data_dir) / "cli-session" if args.data_dir else None
    session = Session(config, directory=directory)
    session.upload_corpus(Path(args.corpus).read_text(encoding="utf-8"))
    info = session.build_map()
    print(f"mapped {info['articles']} articles into {info['k']} clusters", file=sys.stderr)
    session.run()
    session.synthesize()
    return session


def cmd_run(args: argparse.Namespace) -> int:
    session = _run_session(args)
    report = session.get_report()
    Path(args.output).write_text(report["markdown"], encoding="utf-8")
    sidecar = Path(args.output).with_suffix(".citations.json")
    sidecar.write_text(json.dumps(report["citation_map"], indent=2), encoding="utf-8")
    print(f"report written to {args.output}")
    print(f"included {len(session.included_ids())} articles")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    import csv

    session = _run_session(args)
    with open(args.gold, encoding="utf-8") as fh:
        gold = {row["id"] for row in csv.DictReader(fh)}
    result = screening_metrics(session.included_ids(), gold)
    print(f"precision {result.precision:.3f}")
    print(f"recall    {result.recall:.3f}")
    print(f"f1        {result.f1:.3f}")
    if args.output:
        Path(args.output).write_text(session.get_report()["markdown"], encoding="utf-8")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    def make_corpus(seed: int):
        fixture = make_fixture_corpus(
            n=args.articles, n_relevant=args.relevant, seed=seed
        )
        return (
            fixture.records,
            fixture.research_question,
            fixture.inclusion_exclusion_criteria,
            fixture.gold_ids,
        )

    table = compare_partitioning(
        make_corpus, seeds=range(args.seeds), budget=args.budget
    )
    print(table.to_text())
    if args.output:
        Path(args.output).write_text(table.to_csv(), encoding="utf-8")
        print(f"per-seed table written to {args.output}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    from .session import SessionStore

    store = SessionStore(base_dir=Path(args.data_dir)) if args.data_dir else SessionStore()
    app = create_app(store)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_pipeline_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("corpus", help="corpus file (CSV with id,title,abstract[,year] or JSONL)")
    parser.add_argument("--question", required=True, help="research question")
    parser.add_argument("--focus", default="", help="optional detailed focus")
    parser.add_argument("--criteria", default="", help="inclusion/exclusion criteria")
    parser.add_argument("--summarization", default="", help="summarization requirement")
    parser.add_argument("--seed", type=int, default=int(os.environ.get("REVIEWMAP_SEED", "0")))
    parser.add_argument("--budget", type=int, default=None, help="total read budget")
    parser.add_argument("--k", type=int, default=None, help="override the cluster count")
    parser.add_argument("--provider", choices=["mock", "http"], default="mock")
    parser.add_argument("--endpoint", default="", help="chat-completion endpoint URL")
    parser.add_argument("--model", default="", help="model name for the HTTP provider")
    parser.add_argument("--data-dir", default="", help="persist session state here")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="reviewmap")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="screen a corpus and write the report")
    _add_pipeline_args(run_parser)
    run_parser.add_argument("--output", default="report.md")
    run_parser.set_defaults(func=cmd_run)

    eval_parser = subparsers.add_parser("eval", help="run plus screening metrics against gold")
    _add_pipeline_args(eval_parser)
    eval_parser.add_argument("--gold", required=True, help="gold CSV with an id column")
    eval_parser.add_argument("--output", default="")
    eval_parser.set_defaults(func=cmd_eval)

    compare_parser = subparsers.add_parser(
        "compare", help="multi-agent vs single-agent screening comparison"
    )
    compare_parser.add_argument("--seeds", type=int, default=20)
    compare_parser.add_argument("--articles", type=int, default=120)
    compare_parser.add_argument("--relevant", type=int, default=12)
    compare_parser.add_argument("--budget", type=int, default=30)
    compare_parser.add_argument("--output", default="")
    compare_parser.set_defaults(func=cmd_compare)

    serve_parser = subparsers.add_parser("serve", help="serve the HTTP API")
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.add_argument(
        "--port", type=int, default=int(os.environ.get("REVIEWMAP_PORT", "8400"))
    )
    serve_parser.add_argument("--data-dir", default="")
    serve_parser.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
