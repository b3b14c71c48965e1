"""
Command-line entry point.

  avse synth   render a scene to WAVs and a frame stack
  avse run     simulate or run a live session, write the event log and report
  avse sweep   run a named experiment to CSV (and optionally a plot)
  avse report  rebuild a report from an event log CSV
  avse serve   start the HTTP control surface

Exit codes: 0 ok, 1 IO, 2 config, 3 protocol.
"""
import src.config.warnings  # noqa: F401  (warning filters first)

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from src.cli.manifest import build_manifest, read_manifest, write_manifest
from src.config.constants import MODEL_TIERS, SWEEP_NAMES
from src.config.loader import apply_overrides, load_config_file, merge, parse_value
from src.config.settings import configure_logging, settings
from src.metrics.latency import build_report, decompose, gap_report
from src.metrics.plots import latency_histogram, sweep_plot
from src.metrics.sweeps import run_sweep, write_csv
from src.models.inputs import CliConfig, PipelineConfig, SceneParams
from src.models.outputs import RunReport
from src.pipeline.calculus import validate_config
from src.pipeline.events import EventLog
from src.scene.io import write_frames, write_wav
from src.scene.signals import Signal, clean_sum, mix
from src.scene.synth import synth_scene
from src.scene.video import mouth_openings, render_video
from src.utils.errors import CodecError, ConfigError, EmptyPlayback, InvalidInput, ProtocolError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3

RUN_MODES = ("sim", "live-server", "live-client", "live-loopback")
DEFAULT_DURATION_S = 10.0

# PipelineConfig fields exposed as --flags; nested models go through --set
SCALAR_FIELDS = [
    name for name, info in PipelineConfig.model_fields.items()
    if name not in {"enhancer", "channel", "roi", "mode", "seed"}
]


# ===========================================
# ARGUMENTS
# ===========================================

def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", dest="config_path", help="key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="seed for scene and channel draws")
    parser.add_argument("--out", dest="output_dir", default=settings.OUTPUT_DIR, help="output directory")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override any dotted config key, e.g. channel.jitter_ms=0")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline")
    for name in SCALAR_FIELDS:
        info = PipelineConfig.model_fields[name]
        group.add_argument(_flag(name), dest=f"cfg_{name}", default=None, metavar="VALUE",
                           help=f"(default: {info.get_default(call_default_factory=True)})")
    group.add_argument("--enhancer", dest="cfg_enhancer", default=None,
                       help="enhancer kind or model tier (model_1, model_2, model_3)")
    group.add_argument("--channel", dest="cfg_channel", default=None, help="channel preset name")
    group.add_argument("--duration", type=float, default=None, help=f"media seconds (default {DEFAULT_DURATION_S})")
    group.add_argument("--from-manifest", dest="manifest", default=None,
                       help="re-run with the inputs recorded in a manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="avse", description="Chunked audio-visual speech enhancement harness")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    synth = sub.add_parser("synth", help="render a scene to WAVs and frames")
    _add_common(synth)
    synth.add_argument("--targets", type=int, default=None)
    synth.add_argument("--noises", type=int, default=None)
    synth.add_argument("--duration", type=float, default=None)
    synth.add_argument("--snr", type=float, default=None, help="target input SNR in dB")

    run = sub.add_parser("run", help="run a session")
    _add_common(run)
    _add_pipeline_flags(run)
    run.add_argument("--mode", dest="run_mode", choices=RUN_MODES, default="sim")
    run.add_argument("--plot", action="store_true", help="also render a latency histogram")

    sweep = sub.add_parser("sweep", help="run a named experiment")
    _add_common(sweep)
    sweep.add_argument("name", choices=SWEEP_NAMES)
    sweep.add_argument("--plot", action="store_true")

    report = sub.add_parser("report", help="report from an event log CSV")
    _add_common(report)
    report.add_argument("log", help="event log CSV")
    report.add_argument("--t-chunk", type=float, default=None, help="chunk duration (default from manifest or 0.04)")
    report.add_argument("--plot", action="store_true")

    serve = sub.add_parser("serve", help="start the HTTP control surface")
    _add_common(serve)
    serve.add_argument("--host", default=settings.API_HOST)
    serve.add_argument("--port", type=int, default=settings.API_PORT)
    return parser


# ===========================================
# CONFIG RESOLUTION
# ===========================================

def resolve_inputs(args: argparse.Namespace) -> tuple[PipelineConfig, SceneParams, float, int]:
    """
    Defaults < manifest < config file < flags < --set.

    Returns:
        (pipeline config, scene params, duration, seed)
    """
    data: dict[str, Any] = {}
    if getattr(args, "manifest", None):
        manifest = read_manifest(args.manifest)
        data = dict(manifest.get("pipeline") or {})
        data["scene"] = manifest.get("scene") or {}
        if manifest.get("duration_s") is not None:
            data["duration_s"] = manifest["duration_s"]
    if args.config_path:
        data = merge(data, load_config_file(args.config_path))
    for key, value in vars(args).items():
        if key.startswith("cfg_") and value is not None:
            data[key[4:]] = parse_value(value)
    if getattr(args, "duration", None) is not None:
        data["duration_s"] = args.duration
    if isinstance(data.get("channel"), str):
        data["channel"] = {"preset": data["channel"]}
    if isinstance(data.get("enhancer"), str):
        name = data["enhancer"]
        data["enhancer"] = {"preset": name} if name in MODEL_TIERS else {"kind": name}
    apply_overrides(data, args.overrides)

    scene_data = data.pop("scene", None) or {}
    duration = float(data.pop("duration_s", DEFAULT_DURATION_S))
    seed = args.seed if args.seed is not None else int(data.get("seed", settings.DEFAULT_SEED))
    data["seed"] = seed
    if isinstance(data.get("channel"), dict):
        data["channel"].setdefault("seed", seed)
    try:
        scene = SceneParams.model_validate({**scene_data, "seed": seed})
    except ValidationError as e:
        raise ConfigError(f"Invalid scene parameters: {e}") from e
    return validate_config(data), scene, duration, seed


# ===========================================
# SUBCOMMANDS
# ===========================================

def cmd_synth(args: argparse.Namespace) -> int:
    """Render a scene: clean.wav, interference.wav, mixture.wav, frames.npy."""
    data = load_config_file(args.config_path) if args.config_path else {}
    data = data.get("scene", data)
    apply_overrides(data, args.overrides)
    for key, value in (("n_targets", args.targets), ("n_noises", args.noises),
                       ("duration_s", args.duration), ("target_snr_db", args.snr)):
        if value is not None:
            data[key] = value
    seed = args.seed if args.seed is not None else settings.DEFAULT_SEED
    try:
        params = SceneParams.model_validate({**data, "seed": seed})
    except ValidationError as e:
        raise ConfigError(f"Invalid scene parameters: {e}") from e

    out = Path(args.output_dir)
    scene = synth_scene(params, seed)
    mixture, refs, interference = mix(scene)
    clean = clean_sum(refs)
    write_wav(out / "clean.wav", clean)
    write_wav(out / "interference.wav", interference)
    write_wav(out / "mixture.wav", mixture)
    fps = PipelineConfig().fps
    n_frames = int(len(mixture) / params.sample_rate * fps)
    frames = render_video(mouth_openings(refs[0].samples, n_frames, params.sample_rate, fps))
    write_frames(out / "frames.npy", frames)
    write_manifest(out, build_manifest("synth", seed, scene=params))
    logger.info(f"Synthesized {params.duration_s}s scene into {out}")
    return EXIT_OK


def _write_run_outputs(out: Path, result, cfg: PipelineConfig, plot: bool) -> RunReport:
    result.log.to_csv(out / "event_log.csv")
    report = build_report(result)
    (out / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    write_wav(out / "played.wav", Signal(result.played, cfg.sample_rate))
    if plot and report.chunks:
        latency_histogram(report, out / "latency_histogram.png")
    return report


def cmd_run(args: argparse.Namespace) -> int:
    mode = args.run_mode
    pipeline_mode = "sim" if mode == "sim" else "live"
    args.overrides = [*args.overrides, f"mode={pipeline_mode}"]
    cfg, scene, duration, seed = resolve_inputs(args)
    out = Path(args.output_dir)
    write_manifest(out, build_manifest("run", seed, cfg, scene, duration, {"run_mode": mode}))

    if mode == "live-server":
        from src.pipeline.live import run_server

        logger.info(f"Serving on {cfg.host}:{cfg.port} (Ctrl-C to stop)")
        try:
            asyncio.run(run_server(cfg))
        except KeyboardInterrupt:
            logger.info("Server stopped")
        return EXIT_OK

    from src.pipeline.media import build_media_source

    source = build_media_source(cfg, duration, scene)
    if mode == "sim":
        from src.pipeline.simulation import run_simulation

        result = run_simulation(cfg, duration, source=source)
    elif mode == "live-client":
        from src.pipeline.live import run_client

        result = asyncio.run(run_client(cfg, source))
    else:
        from src.pipeline.live import run_loopback

        result = asyncio.run(run_loopback(cfg, duration, source=source))

    report = _write_run_outputs(out, result, cfg, args.plot)
    print(
        f"median delay {report.t_delay.median:.3f}s | gaps {report.gap_count} | "
        f"dropped {report.dropped} | coherent {report.coherent}"
    )
    if report.protocol_errors:
        logger.error(f"{report.protocol_errors} protocol errors during the run")
        return EXIT_PROTOCOL
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else settings.DEFAULT_SEED
    out = Path(args.output_dir)
    result = run_sweep(args.name, seed=seed)
    write_csv(result, out / f"{args.name}.csv")
    (out / f"{args.name}_summary.json").write_text(json.dumps(result.summary, indent=2), encoding="utf-8")
    if args.plot:
        sweep_plot(result, out / f"{args.name}.png")
    write_manifest(out, build_manifest("sweep", seed, extra={"sweep": args.name}))
    print(json.dumps(result.summary, indent=2))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    t_chunk = args.t_chunk
    if t_chunk is None:
        manifest_path = Path(args.log).parent / "manifest.json"
        pipeline = read_manifest(manifest_path).get("pipeline") if manifest_path.exists() else None
        t_chunk = (pipeline or {}).get("t_chunk", PipelineConfig().t_chunk)
    log = EventLog.from_csv(args.log, t_chunk)
    decomposition = decompose(log)
    try:
        gaps = gap_report(log)
    except EmptyPlayback as e:
        raise InvalidInput(str(e)) from e
    report = RunReport(
        chunks=decomposition.chunks,
        t_delay=decomposition.t_delay,
        t_comm=decomposition.t_comm,
        gap_count=gaps.gap_count,
        gap_total=gaps.gap_total,
        coherent=gaps.gap_count == 0,
        captured=len(log.event_times("captured")),
        played=len(log.played()),
        dropped=len(log.dropped),
    )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    if args.plot and report.chunks:
        latency_histogram(report, out / "latency_histogram.png")
    print(f"median delay {report.t_delay.median:.3f}s | gaps {report.gap_count}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("src.api.server:app", host=args.host, port=args.port, log_level=args.log_level.lower())
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cli = CliConfig(
            subcommand=args.subcommand,
            config_path=args.config_path,
            seed=args.seed,
            output_dir=args.output_dir,
            log_level=args.log_level,
        )
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    configure_logging(cli.log_level)

    try:
        return COMMANDS[cli.subcommand](args)
    except (ConfigError, InvalidInput, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolError, CodecError) as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
