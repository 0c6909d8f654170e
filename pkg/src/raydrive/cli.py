"""Command line entry point.

Subcommands: train, eval, play, replay, gen-track, inspect.
Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, nn, stream
from .agent import PriorityConfig
from .env import EnvConfig
from .trackmap import TrackError, gen_corridor_track, gen_ring_track, serialize_trk


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad flags as validation errors (exit 1)."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="raydrive",
                     description="Grid-world driving sim with a deep Q-learning stack")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="run a training experiment from a JSON config")
    p_train.add_argument("config", help="path to the experiment config JSON")

    p_eval = sub.add_parser("eval", help="greedy-evaluate a saved model on a track")
    p_eval.add_argument("model", help="path to an MLPv1 checkpoint")
    p_eval.add_argument("track", help="path to a TRK1 track file")
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--agent-kind", default="DQN_ORIGINAL",
                        choices=harness.AGENT_KINDS)

    p_play = sub.add_parser("play", help="serve human-drive mode over a websocket")
    p_play.add_argument("track", help="path to a TRK1 track file")
    p_play.add_argument("--port", type=int, default=8765)
    p_play.add_argument("--tick-hz", type=float, default=30.0)

    p_replay = sub.add_parser("replay", help="stream a recorded trace over a websocket")
    p_replay.add_argument("trace", help="path to a TRACEv1 JSONL trace")
    p_replay.add_argument("--port", type=int, default=8765)
    p_replay.add_argument("--tick-hz", type=float, default=30.0)

    p_gen = sub.add_parser("gen-track", help="generate a TRK1 track file")
    gen_sub = p_gen.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    p_ring = gen_sub.add_parser("ring", help="annulus track")
    p_ring.add_argument("--width", type=int, default=100)
    p_ring.add_argument("--height", type=int, default=100)
    p_ring.add_argument("--outer", type=float, default=40.0)
    p_ring.add_argument("--inner", type=float, default=25.0)
    p_ring.add_argument("--checkpoints", type=int, default=4)
    p_ring.add_argument("-o", "--out", required=True)
    p_corr = gen_sub.add_parser("corridor", help="straight corridor track")
    p_corr.add_argument("--length", type=int, required=True)
    p_corr.add_argument("--corridor-width", type=int, required=True)
    p_corr.add_argument("-o", "--out", required=True)

    p_inspect = sub.add_parser("inspect", help="print layer shapes and parameter counts")
    p_inspect.add_argument("model", help="path to an MLPv1 checkpoint")

    return parser


def _cmd_train(args) -> int:
    config = harness.config_from_json_file(args.config)
    if config.stream is not None and config.stream.get("mode") == "live":
        harness.serve_stream(config, "live")
        return 0
    summary = harness.run_training(config)
    print(f"metrics: {summary['metrics_path']}")
    print(f"final model: {summary['final_model_path']}")
    for path in summary["checkpoint_paths"]:
        print(f"checkpoint: {path}")
    for path in summary["trace_paths"]:
        print(f"trace: {path}")
    return 0


def _cmd_eval(args) -> int:
    stats = harness.run_eval(args.model, args.track, args.episodes,
                             agent_kind=args.agent_kind, seed=args.seed)
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


def _cmd_play(args) -> int:
    trk_text = Path(args.track).read_text(encoding="utf-8")
    print(f"serving play mode on ws://127.0.0.1:{args.port} (Ctrl+C to stop)")
    stream.serve_play(trk_text, port=args.port, tick_hz=args.tick_hz,
                      env_config=EnvConfig())
    return 0


def _cmd_replay(args) -> int:
    print(f"serving replay on ws://127.0.0.1:{args.port} (Ctrl+C to stop)")
    stream.serve_replay(args.trace, port=args.port, tick_hz=args.tick_hz)
    return 0


def _cmd_gen_track(args) -> int:
    if args.kind == "ring":
        track = gen_ring_track(args.width, args.height, args.outer, args.inner,
                               args.checkpoints)
    else:
        track = gen_corridor_track(args.length, args.corridor_width)
    Path(args.out).write_text(serialize_trk(track), encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    net = nn.load_model(Path(args.model).read_bytes())
    for i, layer in enumerate(net.layers):
        print(f"layer {i}: {layer.in_dim} -> {layer.out_dim} "
              f"{layer.activation} params {layer.param_count}")
    print(f"total params {net.num_params}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "play": _cmd_play,
    "replay": _cmd_replay,
    "gen-track": _cmd_gen_track,
    "inspect": _cmd_inspect,
}

_VALIDATION_ERRORS = (
    harness.ConfigInvalid,
    harness.EmptyEval,
    TrackError,
    nn.BadFormat,
    nn.BadVersion,
    nn.ShapeMismatch,
    nn.ArchitectureMismatch,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.cmd](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
