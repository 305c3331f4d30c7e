"""Command-line pipeline driver.

    serpeval run     execute the protocol and archive triplets
    serpeval probe   re-check links, score engine performance
    serpeval score   compute query-context relevance weights
    serpeval report  render tables/charts and the coupled score
    serpeval serve   start the judgment-session HTTP API

The run definition lives in a config file (--config or SERPEVAL_CONFIG);
flags override. Exit codes: 0 success, 2 config error, 3 pipeline-order
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, load_config
from .corpus import CorpusError, RunExistsError, UnknownRunError
from .engines import AdapterConfigError
from .pipeline import PipelineOrderError, stage_probe, stage_report, stage_run, stage_score

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serpeval",
        description="Contextual search-engine evaluation harness",
    )
    parser.add_argument(
        "--config", default=None,
        help="run-definition config file (default: $SERPEVAL_CONFIG)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the protocol and archive triplets")
    run.add_argument("--force", action="store_true",
                     help="overwrite an existing run directory")

    probe = sub.add_parser("probe", help="check links and score performance")
    probe.add_argument("--run-id", default=None)

    score = sub.add_parser("score", help="compute relevance weights")
    score.add_argument("--run-id", default=None)

    report = sub.add_parser("report", help="render tables and the coupled score")
    report.add_argument("--run-id", default=None)
    report.add_argument("--format", default="text,csv",
                        help="comma list of text,csv,png (default text,csv)")
    report.add_argument("--weights", default=None,
                        help="system,query,user coupling weights (e.g. 1,0,0)")
    report.add_argument("--locale", choices=("point", "comma"), default="point",
                        help="decimal separator in rendered output")

    serve = sub.add_parser("serve", help="serve the judgment-session API")
    serve.add_argument("--data-root", default=None,
                       help="serve an existing data root without a config file")
    serve.add_argument("--addr", default=None,
                       help="host:port (default $SERPEVAL_ADDR or config serve.addr)")
    serve.add_argument("--blind", dest="blind", action="store_true", default=None,
                       help="hide engine identity from judges (default)")
    serve.add_argument("--no-blind", dest="blind", action="store_false",
                       help="reveal engine identity, replicating an open protocol")
    serve.add_argument("--allow-skip", action="store_true",
                       help="accept votes outside the current group")
    return parser


def _load(args) -> HarnessConfig:
    path = args.config or os.environ.get("SERPEVAL_CONFIG")
    if not path:
        raise ConfigError("no config file: pass --config or set SERPEVAL_CONFIG")
    return load_config(path)


def _parse_weights(raw: str | None) -> tuple[float, float, float]:
    if raw is None:
        return (1 / 3, 1 / 3, 1 / 3)
    parts = raw.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--weights needs three comma-separated numbers, got {raw!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise ConfigError(f"bad --weights value: {raw!r}") from exc


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _serve(args)
        config = _load(args)
        if args.command == "run":
            summary = stage_run(config, force=args.force)
            print(
                f"run {summary.run_id}: {summary.triplets_stored} triplets stored, "
                f"{summary.fetch_failures} fetch failures, "
                f"{summary.groups_executed} groups"
            )
            for warning in summary.warnings:
                print(f"warning: {warning}", file=sys.stderr)
        elif args.command == "probe":
            run_id = args.run_id or config.run_id
            report = stage_probe(
                config.data_root, run_id, config.probe,
                max_workers=config.fetch.max_workers,
                per_host_delay_s=config.fetch.per_host_delay_ms / 1000.0,
                timeout_s=config.fetch.timeout_s,
            )
            for engine in report.engines:
                avg = (
                    f"{engine.avg_response_time:.2f}s"
                    if engine.avg_response_time is not None else "n/a"
                )
                print(
                    f"{engine.engine_id}: dead {engine.dead_rate:.2%}, "
                    f"parasites {engine.parasite_rate:.2%}, "
                    f"redundant {engine.redundancy_rate:.2%}, avg {avg}"
                )
        elif args.command == "score":
            run_id = args.run_id or config.run_id
            records = stage_score(config.data_root, run_id)
            print(f"scored {len(records)} results for run {run_id}")
        elif args.command == "report":
            run_id = args.run_id or config.run_id
            formats = [f.strip() for f in args.format.split(",") if f.strip()]
            result = stage_report(
                config.data_root, run_id, formats,
                weights=_parse_weights(args.weights), locale=args.locale,
            )
            for evaluation in result.evaluations:
                print(f"{evaluation.engine_id}: coupled {evaluation.coupled_score:.4f}")
            print(f"reports written under {config.data_root / run_id / 'reports'}")
    except (ConfigError, AdapterConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineOrderError, UnknownRunError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except RunExistsError as exc:
        print(f"refusing: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CorpusError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _serve(args) -> int:
    import uvicorn

    from .service import create_app

    if args.data_root is not None:
        data_root = args.data_root
        default_addr = "127.0.0.1:8080"
        blind = True if args.blind is None else args.blind
        allow_skip = args.allow_skip
    else:
        config = _load(args)
        data_root = config.data_root
        default_addr = config.serve.addr
        blind = config.serve.blind if args.blind is None else args.blind
        allow_skip = args.allow_skip or config.serve.allow_skip
    addr = args.addr or os.environ.get("SERPEVAL_ADDR") or default_addr
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"bad address {addr!r}; expected host:port")
    app = create_app(data_root, blind=blind, allow_skip=allow_skip)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
