"""Command-line entry points: train, eval, replay, sweep, serve, synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .alerts import OPERATING_MODES, alert_json
from .errors import DriveWatchError
from .features import WindowSpec, feature_dump_line
from .model import load_model, save_model
from .pipeline import (
    PipelineConfig,
    ReplayClock,
    evaluate_sessions,
    replay_session,
    session_window_results,
    train_from_sessions,
    window_sweep,
)
from .service import DriveWatchServer
from .synth import make_corpus
from .telemetry import SessionRecord, load_session, save_session

log = logging.getLogger(__name__)


def _load_sessions_dir(path: str) -> list[SessionRecord]:
    root = Path(path)
    if not root.is_dir():
        raise DriveWatchError(f"{path} is not a directory")
    sessions = []
    for child in sorted(root.iterdir()):
        if child.is_dir() and (child / "meta.json").exists():
            sessions.append(load_session(child))
    return sessions


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig(seed=getattr(args, "seed", 0))
    window_ms = getattr(args, "window_ms", None)
    overlap = getattr(args, "overlap", None)
    if window_ms is not None or overlap is not None:
        config.window = WindowSpec(
            length_ms=window_ms if window_ms is not None else 10_000,
            overlap_frac=overlap if overlap is not None else 0.5,
        )
    return config


def cmd_train(args: argparse.Namespace) -> int:
    sessions = _load_sessions_dir(args.sessions)
    if not sessions:
        raise DriveWatchError(f"no sessions found under {args.sessions}")
    config = _pipeline_config(args)
    artifact, report = train_from_sessions(
        sessions, baseline_group=args.baseline_group, config=config, rng_seed=args.seed
    )
    save_model(artifact, args.out)
    print(f"trained on {report['n_windows']} windows from {report['n_sessions']} sessions")
    print(f"baseline ({args.baseline_group}): {report['n_baseline_windows']} windows")
    for name, meta in report["variants"].items():
        print(
            f"variant {name}: inertia {meta['inertia']:.6g} after {meta['iterations_run']} iterations,"
            f" baseline split {meta['baseline_counts']}"
            + (" (tie broken by distance)" if meta.get("tie_broken") else "")
        )
    print(f"model written to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    sessions = _load_sessions_dir(args.sessions)
    artifact = load_model(args.model)
    config = _pipeline_config(args)
    report = evaluate_sessions(sessions, artifact, config)
    Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    if args.dump_features:
        with open(args.dump_features, "w") as fh:
            for record in sessions:
                for result in session_window_results(record, config):
                    if result.features is not None:
                        fh.write(feature_dump_line(result.features, result.statuses) + "\n")
    rate = report["separation_rate"]
    print(f"evaluated {len(sessions)} sessions; separation rate: "
          f"{rate:.3f}" if rate is not None else "n/a")
    print(f"report written to {args.report}")
    return 0


def _load_privacy_script(path: str | None) -> list[tuple[int, bool]]:
    if not path:
        return []
    data = json.loads(Path(path).read_text())
    return [(int(item["t_ms"]), bool(item["on"])) for item in data]


def cmd_replay(args: argparse.Namespace) -> int:
    record = load_session(args.session)
    artifact = load_model(args.model)
    config = _pipeline_config(args)
    config.mode = args.mode
    clock = ReplayClock(speed_factor=args.speed) if args.speed else None
    alerts, engine = replay_session(
        record,
        artifact,
        config,
        privacy_script=_load_privacy_script(args.privacy_script),
        clock=clock,
        sleep_fn=time.sleep,
    )
    with open(args.emit, "w") as fh:
        for alert in alerts:
            fh.write(alert_json(alert) + "\n")
    presented = sum(1 for a in alerts if not a.suppressed)
    print(
        f"replayed {record.session_id}: {engine.windows_closed} windows"
        f" ({engine.windows_dropped} dropped), {len(alerts)} alerts"
        f" ({presented} presented), log at {args.emit}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    sessions = _load_sessions_dir(args.sessions)
    lengths = [int(x) for x in args.lengths.split(",")]
    report = window_sweep(sessions, lengths, baseline_group=args.baseline_group, rng_seed=args.seed)
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n")
        print(f"sweep report written to {args.report}")
    else:
        print(text)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    artifact = load_model(args.model)
    config = PipelineConfig(seed=args.seed)
    server = DriveWatchServer(host=args.host, port=args.port, artifact=artifact, config=config)
    print(f"serving on {args.host}:{server.port} (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sessions = make_corpus(
        n_nc=args.nc, n_pd=args.pd, duration_ms=args.duration_s * 1000, seed=args.seed
    )
    for record in sessions:
        save_session(record, out / record.session_id)
    print(f"wrote {len(sessions)} sessions under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivewatch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the irregularity model from recorded sessions")
    p.add_argument("--sessions", required=True)
    p.add_argument("--baseline-group", default="non_pd")
    p.add_argument("--out", required=True)
    p.add_argument("--window-ms", type=int, default=10_000, dest="window_ms")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="batch-predict sessions and report separation")
    p.add_argument("--model", required=True)
    p.add_argument("--sessions", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--dump-features", default=None)
    p.add_argument("--window-ms", type=int, default=10_000, dest="window_ms")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="deterministically replay a session into an alert log")
    p.add_argument("--session", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--speed", type=float, default=0.0, help="pacing factor; 0 = no pacing")
    p.add_argument("--emit", required=True)
    p.add_argument("--privacy-script", default=None)
    p.add_argument("--mode", default="experience", choices=OPERATING_MODES)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("sweep", help="window-length sweep with clustering quality per length")
    p.add_argument("--sessions", required=True)
    p.add_argument("--lengths", default="1000,3000,5000,10000")
    p.add_argument("--baseline-group", default="non_pd")
    p.add_argument("--report", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the live wire service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic session corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--nc", type=int, default=13)
    p.add_argument("--pd", type=int, default=9)
    p.add_argument("--duration-s", type=int, default=300, dest="duration_s")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (DriveWatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
