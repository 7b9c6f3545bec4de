"""Command line front end.

Subcommands:

    run             start the gateway WebSocket server
    serve-backends  start the mock speech backends over HTTP
    simulate        replay a scenario script and check its expectations
    bench           drive concurrent sessions and print latency stats
    chunk           split one reply text and print the chunks
    pipeline-sweep  schedule turns over an rtf grid and print CSV

Exit codes: 0 on success, 1 when a simulation or load run fails its
checks, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .backend_server import BackendServerConfig, create_backend_app
from .chunker import ChunkingConfig, chunk_response
from .errors import ConfigError, InvalidInput, VoxhubError
from .gateway import GatewayConfig
from .harness import ScenarioScript, bench, bench_config, record_stream, simulate
from .pipeline import sweep, sweep_csv
from .scenarios import builtin_scenario_names, builtin_scenario_text

DEFAULT_HOST = "127.0.0.1"
DEFAULT_GATEWAY_PORT = 8700
DEFAULT_BACKEND_PORT = 8800


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxhub",
        description="Voice conversation gateway: turn routing, chunked synthesis, latency tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="start the gateway server")
    run.add_argument("--config", type=Path, help="gateway config JSON")
    run.add_argument("--host", default=None)
    run.add_argument("--port", type=int, default=None)
    run.add_argument(
        "--time-mode",
        choices=("simulated", "wallclock"),
        default=None,
        help="override the configured time mode",
    )

    backends = sub.add_parser("serve-backends", help="start the mock speech backends")
    backends.add_argument("--host", default=DEFAULT_HOST)
    backends.add_argument("--port", type=int, default=DEFAULT_BACKEND_PORT)
    backends.add_argument(
        "--serve-agents",
        action="store_true",
        help="also expose the builtin dialogue agents over /v1/respond",
    )

    sim = sub.add_parser("simulate", help="replay a scenario script")
    sim.add_argument(
        "scenario",
        help=f"builtin scenario name ({', '.join(builtin_scenario_names())}) or a JSON file path",
    )
    sim.add_argument("--config", type=Path, help="gateway config JSON")
    sim.add_argument(
        "--text-input",
        action="store_true",
        help="send utterances as text instead of synthetic audio",
    )
    sim.add_argument(
        "--record",
        type=Path,
        help="also write every server message as a framed byte stream",
    )

    bench_cmd = sub.add_parser("bench", help="run concurrent sessions and print stats")
    bench_cmd.add_argument("--sessions", type=int, default=50)
    bench_cmd.add_argument("--turns", type=int, default=5)
    bench_cmd.add_argument(
        "--time-mode", choices=("simulated", "wallclock"), default="simulated"
    )

    chunk_cmd = sub.add_parser("chunk", help="split a reply text into chunks")
    chunk_cmd.add_argument("--text", required=True)
    chunk_cmd.add_argument("--max-tokens", type=int, default=12)
    chunk_cmd.add_argument("--min-tokens", type=int, default=3)

    sweep_cmd = sub.add_parser(
        "pipeline-sweep", help="schedule equal-chunk turns over an rtf grid"
    )
    sweep_cmd.add_argument(
        "--rtf", default="0.5,0.85,1.0,1.5", help="comma-separated real-time factors"
    )
    sweep_cmd.add_argument("--chunks", default="3", help="comma-separated chunk counts")
    sweep_cmd.add_argument(
        "--chunk-ms", default="2000", help="comma-separated chunk durations"
    )
    sweep_cmd.add_argument("--stt-ms", type=int, default=800)
    sweep_cmd.add_argument("--agent-ms", type=int, default=100)

    return parser


def _load_gateway_config(args) -> GatewayConfig:
    if getattr(args, "config", None):
        config = GatewayConfig.from_file(args.config)
    else:
        config = GatewayConfig.from_dict({})
    return config


def _split_listen(listen: str) -> tuple:
    host, _, port = listen.rpartition(":")
    return host or DEFAULT_HOST, int(port)


def _parse_csv_numbers(raw: str, cast) -> list:
    try:
        return [cast(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {raw!r}: {exc}") from None


def _cmd_run(args) -> int:
    import uvicorn

    from .server import create_app

    config = _load_gateway_config(args)
    host, port = _split_listen(config.listen)
    if args.host:
        host = args.host
    if args.port:
        port = args.port
    if args.time_mode:
        config = replace(config, time_mode=args.time_mode)
    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def _cmd_serve_backends(args) -> int:
    import uvicorn

    app = create_backend_app(BackendServerConfig(serve_agents=args.serve_agents))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _load_script(ref: str) -> ScenarioScript:
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        return ScenarioScript.from_file(path)
    return ScenarioScript.from_dict(json.loads(builtin_scenario_text(ref)))


def _cmd_simulate(args) -> int:
    script = _load_script(args.scenario)
    config = _load_gateway_config(args)
    code = simulate(script, config=config, use_audio=not args.text_input)
    if args.record:
        args.record.write_bytes(record_stream(script, config=config))
        print(f"recorded server stream to {args.record}")
    return code


def _cmd_bench(args) -> int:
    report = bench(
        sessions=args.sessions,
        turns=args.turns,
        config=bench_config(time_mode=args.time_mode, max_sessions=args.sessions + 8),
    )
    print(report.to_text())
    return 1 if report.ordering_violations or report.leakage_count else 0


def _cmd_chunk(args) -> int:
    config = ChunkingConfig(max_tokens=args.max_tokens, min_tokens=args.min_tokens)
    for chunk in chunk_response(args.text, config):
        print(chunk.text)
    return 0


def _cmd_pipeline_sweep(args) -> int:
    rows = sweep(
        rtfs=_parse_csv_numbers(args.rtf, float),
        n_chunks_options=_parse_csv_numbers(args.chunks, int),
        chunk_ms_options=_parse_csv_numbers(args.chunk_ms, int),
        stt_ms=args.stt_ms,
        agent_ms=args.agent_ms,
    )
    sys.stdout.write(sweep_csv(rows))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "serve-backends": _cmd_serve_backends,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "chunk": _cmd_chunk,
    "pipeline-sweep": _cmd_pipeline_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VoxhubError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
