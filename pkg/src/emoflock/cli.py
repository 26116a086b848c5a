"""Operator command line.

Batch commands (simulate / render / classify / replay / normalize) run the
core library directly and are fully deterministic under --seed; ``serve``
hosts the FastAPI session service. Exit codes: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, engine as eng, flock as fl, render as rd
from .emotions import Emotion, config_for, parse_emotion
from .physio import EmptySeriesError, PersonPipeline

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _parse_bounds(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        bounds = (float(w), float(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bounds must look like 800x600, got {text!r}")
    if bounds[0] <= 0 or bounds[1] <= 0:
        raise argparse.ArgumentTypeError(f"bounds must be positive, got {text!r}")
    return bounds


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        size = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 400x300, got {text!r}")
    if size[0] <= 0 or size[1] <= 0:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return size


def _emotion_help() -> str:
    rows = []
    for e in Emotion:
        c = config_for(e)
        rows.append(
            f"{e.value}: S={c.separation_coeff} M={c.alignment_coeff} "
            f"K={c.cohesion_coeff} R={c.perception_range} r={c.separation_range} "
            f"V={c.max_speed}"
        )
    return "; ".join(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emoflock", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "simulate",
        help="run the flock and write a trajectory file",
        description="Emotion motion configs: " + _emotion_help(),
    )
    p.add_argument("--emotion", default="joy")
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--bounds", type=_parse_bounds, default=(800.0, 600.0))
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="rasterize a trajectory into PPM frames")
    p.add_argument("--traj", required=True)
    p.add_argument("--stroke-length", type=int, default=100)
    p.add_argument("--stroke-width", type=int, default=3)
    p.add_argument("--palette", choices=[p.value for p in rd.Palette], default="mixed")
    p.add_argument("--bg", choices=[b.value for b in rd.Background], default="dark")
    p.add_argument("--size", type=_parse_size, default=(800, 600))
    p.add_argument("--bounds", type=_parse_bounds, default=(800.0, 600.0))
    p.add_argument("--outdir", required=True)

    p = sub.add_parser("classify", help="classify an RR CSV into emotion assessments")
    p.add_argument("--rr", required=True, help="CSV with header person_id,timestamp_ms,rr_ms")
    p.add_argument("--window", type=float, default=60.0, help="window length, seconds")
    p.add_argument("--hop", type=float, default=5.0, help="window hop, seconds")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--host", default=os.environ.get("EMOFLOCK_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("EMOFLOCK_PORT", "8710")))
    p.add_argument(
        "--tick-rate", type=float, default=float(os.environ.get("EMOFLOCK_TICK_RATE", "30"))
    )
    p.add_argument("--seed", type=int, default=int(os.environ.get("EMOFLOCK_SEED", "0")))
    p.add_argument("--emotion", default=os.environ.get("EMOFLOCK_EMOTION", "joy"))

    p = sub.add_parser("replay", help="re-run a recorded inbound log deterministically")
    p.add_argument("--log", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--emotion", default="joy")
    p.add_argument("--tick-rate", type=float, default=30.0)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--out", default=None, help="output NDJSON path (default stdout)")

    p = sub.add_parser("normalize", help="column-normalize a response-count CSV")
    p.add_argument("--counts", required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    emotion = parse_emotion(args.emotion)
    if args.frames < 0:
        print("emoflock: --frames must be >= 0", file=sys.stderr)
        return USAGE_ERROR
    config = config_for(emotion, args.n)
    state = fl.init_flock(config, args.bounds, args.seed)

    def states():
        nonlocal state
        for k in range(args.frames):
            if k:
                state = fl.step(state, config)
            yield state

    fl.write_trajectory(args.out, states())
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    try:
        aesthetics = rd.Aesthetics(
            stroke_length=args.stroke_length,
            stroke_width=args.stroke_width,
            background=rd.Background(args.bg),
            palette=rd.Palette(args.palette),
        )
    except ValueError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return USAGE_ERROR
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    buffer = None
    count = 0
    try:
        for tick, positions, _ in fl.read_trajectory(args.traj):
            if buffer is None:
                buffer = rd.TrailBuffer.for_flock(len(positions), args.bounds)
            buffer.append_positions(positions, aesthetics)
            frame = rd.render_frame(buffer, aesthetics, args.size)
            (outdir / f"frame_{count:06d}.ppm").write_bytes(rd.encode_frame(frame))
            count += 1
    except (OSError, ValueError) as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    window_ms = int(args.window * 1000)
    hop_ms = int(args.hop * 1000)
    pipelines: dict[str, PersonPipeline] = {}
    results = []
    accepted = 0
    try:
        with open(args.rr, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["person_id", "timestamp_ms", "rr_ms"]:
                print(
                    "emoflock: RR CSV must have header person_id,timestamp_ms,rr_ms",
                    file=sys.stderr,
                )
                return DATA_ERROR
            for row in reader:
                person = row["person_id"]
                pipeline = pipelines.get(person)
                if pipeline is None:
                    pipeline = PersonPipeline(person, window_ms=window_ms, hop_ms=hop_ms)
                    pipelines[person] = pipeline
                try:
                    ts = int(row["timestamp_ms"])
                    rr = float(row["rr_ms"])
                except (TypeError, ValueError):
                    pipeline.dropped += 1
                    continue
                before = pipeline.dropped
                closed = pipeline.add_sample(ts, rr)
                if pipeline.dropped == before:
                    accepted += 1
                results.extend(closed)
    except OSError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR
    if not pipelines or accepted == 0:
        print("emoflock: no valid RR samples after filtering", file=sys.stderr)
        return DATA_ERROR
    with open(args.out, "w") as fh:
        for result in results:
            fh.write(json.dumps(result.to_record()) + "\n")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    from .api import SessionCreateRequest

    try:
        defaults = SessionCreateRequest(
            seed=args.seed, tick_rate=args.tick_rate, emotion=args.emotion
        )
    except ValueError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return USAGE_ERROR
    app = create_app(default_session=defaults)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    try:
        emotion = parse_emotion(args.emotion)
    except ValueError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        log = eng.load_log(args.log)
    except (OSError, ValueError) as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR
    config = eng.EngineConfig(
        seed=args.seed, flock_size=args.n, tick_rate=args.tick_rate, emotion=emotion
    )
    frames = args.frames
    if frames is None and not log:
        frames = 300
    stream = eng.dump_stream(eng.replay(config, log, frames))
    if args.out:
        Path(args.out).write_text(stream)
    else:
        sys.stdout.write(stream)
    return 0


def _cmd_normalize(args: argparse.Namespace) -> int:
    try:
        counts = analysis.read_counts_csv(args.counts)
        normalized, zero_cols = analysis.normalize_confusion(counts)
    except (OSError, ValueError) as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR
    if zero_cols:
        names = [analysis.STUDY_ORDER[i].value for i in zero_cols]
        print(f"emoflock: warning: zero-total columns {names}", file=sys.stderr)
    analysis.write_matrix_csv(args.out, normalized)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "render": _cmd_render,
    "classify": _cmd_classify,
    "serve": _cmd_serve,
    "replay": _cmd_replay,
    "normalize": _cmd_normalize,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EmptySeriesError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ValueError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"emoflock: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
