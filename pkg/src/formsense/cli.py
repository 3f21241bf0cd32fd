"""Command-line entry points: generate | train | diagnose | watch | export-plots."""

from __future__ import annotations

import argparse
import json
import queue
import sys
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_config
from .engine import load_engine
from .forest import Diagnosis, load_forest
from .io import ParseError, iter_file_chunks, open_stream, read_series
from .model import ConfigError, Exercise, exercise_preset, validate_series
from .pipeline import (
    dataset_from_dir,
    diagnose_segment,
    diagnose_series,
    evaluate_split,
    prepare_series,
    prepare_stream_rep,
    train_split,
)
from .rig import RigConfig, generate_dataset, generate_files
from .segmentation import OnlineSegmenter


@dataclass
class SessionMetrics:
    """Per-rep timing of one streaming session."""

    detection_lags: list[float] = field(default_factory=list)   # seconds
    compute_latencies: list[float] = field(default_factory=list)  # milliseconds
    diagnoses: list[Diagnosis] = field(default_factory=list)

    @property
    def rep_count(self) -> int:
        return len(self.diagnoses)

    def summary(self) -> str:
        if not self.diagnoses:
            return "session: 0 reps"
        lag_mean, lag_std = np.mean(self.detection_lags), np.std(self.detection_lags)
        ms_mean, ms_std = np.mean(self.compute_latencies), np.std(self.compute_latencies)
        return (f"session: {self.rep_count} reps; detection lag "
                f"{lag_mean:.2f} +/- {lag_std:.2f} s; compute "
                f"{ms_mean:.1f} +/- {ms_std:.1f} ms")

    def to_dict(self) -> dict:
        return {
            "rep_count": self.rep_count,
            "detection_lags_s": [round(v, 6) for v in self.detection_lags],
            "compute_latency_ms": [round(v, 3) for v in self.compute_latencies],
            "labels": [d.label.id for d in self.diagnoses],
        }


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")


def _diagnosis_line(diag: Diagnosis, extra: str = "") -> str:
    p = diag.probabilities.get(diag.label.id, 0.0)
    verdict = "correct" if diag.label.kind == "correct" else diag.recommendation
    return f"rep {diag.rep_index}: {verdict} (p={p:.2f}{extra})"


def cmd_generate(cfg: PipelineConfig, dataset: bool) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    exercise = Exercise.from_name(cfg.exercise)
    if dataset:
        outs = generate_dataset(
            exercise,
            class_ids=list(cfg.dataset["class_ids"]),
            reps_per_class=int(cfg.dataset["reps_per_class"]),
            reps_per_session=int(cfg.dataset["reps_per_session"]),
            seed=cfg.seed,
            frames_per_rep=int(cfg.rig.get("frames_per_rep", 40)),
            noise_std=float(cfg.rig.get("noise_std", 0.004)),
        )
        for i, out in enumerate(outs):
            stem = f"{cfg.exercise}_c{out.label.id}_s{i:03d}"
            from .io import write_series
            from .rig import write_truth

            write_series(out.series, cfg.out_dir / f"{stem}.lms")
            write_truth(out, cfg.out_dir / f"{stem}.truth.json")
        print(f"wrote {len(outs)} sessions to {cfg.out_dir}")
        return 0
    rig_cfg = RigConfig(exercise=exercise, seed=cfg.seed, **cfg.rig)
    stem = f"{cfg.exercise}_c{rig_cfg.fault_mode or 0}"
    out = generate_files(rig_cfg, cfg.out_dir / f"{stem}.lms",
                         cfg.out_dir / f"{stem}.truth.json")
    print(f"wrote {cfg.out_dir / (stem + '.lms')} ({out.config.reps} reps, "
          f"label {out.label.id})")
    return 0


def cmd_train(cfg: PipelineConfig, full_eval: bool) -> int:
    spec = exercise_preset(cfg.exercise)
    data = dataset_from_dir(cfg.data_dir, spec, cfg.smoothing, cfg.gate)
    if len(data) == 0:
        raise ConfigError("dataset produced no accepted reps")
    print(f"dataset: {len(data)} reps, classes "
          f"{sorted(int(c) for c in set(data.labels.tolist()))}")
    art = train_split(
        data, cfg.seed, replace(cfg.train, seed=cfg.seed), cfg.engine,
        cfg.engine_variant, cfg.forest, cfg.search if cfg.tune else None)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    engine_path = cfg.resolved_engine_path()
    forest_path = cfg.resolved_forest_path()
    art.engine.save(engine_path, replace(cfg.train, seed=cfg.seed))
    art.forest.save(forest_path)
    report = {
        "exercise": cfg.exercise,
        "engine_variant": cfg.engine_variant,
        "seed": cfg.seed,
        "n_reps": len(data),
        "split": {
            "f1": art.report.f1,
            "n_train": art.report.n_train,
            "n_test": art.report.n_test,
            "per_class": {str(k): v for k, v in art.report.per_class.items()},
        },
        "forest_config": {
            "n_trees": art.forest_config.n_trees,
            "max_depth": art.forest_config.max_depth,
            "max_features": art.forest_config.max_features,
            "min_samples_leaf": art.forest_config.min_samples_leaf,
        },
    }
    if full_eval:
        ev = evaluate_split(data, cfg.seed, cfg.eval_seeds,
                            replace(cfg.train, seed=cfg.seed), cfg.engine,
                            cfg.engine_variant, cfg.forest,
                            cfg.search if cfg.tune else None)
        report["evaluation"] = ev.to_dict()
        print(f"evaluation over {cfg.eval_seeds} seeds: weighted F1 "
              f"{ev.f1_mean:.3f} +/- {ev.f1_std:.3f}")
    _write_json(cfg.out_dir / "report.json", report)
    print(f"held-out weighted F1: {art.report.f1:.3f}")
    print(f"wrote {engine_path}, {forest_path}, {cfg.out_dir / 'report.json'}")
    return 0


def cmd_diagnose(cfg: PipelineConfig, series_path: str) -> int:
    spec = exercise_preset(cfg.exercise)
    engine = load_engine(cfg.resolved_engine_path())
    forest = load_forest(cfg.resolved_forest_path())
    series = read_series(series_path)
    violations = validate_series(series, spec)
    if violations:
        print(f"note: {len(violations)} series violations (first: "
              f"frame {violations[0].frame_index} {violations[0].rule})")
    diags, prepared = diagnose_series(series, engine, forest, spec,
                                      cfg.smoothing, cfg.gate)
    if not diags:
        print("no reps detected")
        return 0
    for diag in diags:
        print(_diagnosis_line(diag, extra=f", compute {diag.latency_ms:.1f} ms"))
    for start, end, reason in prepared.rejected:
        print(f"rejected frames {start}-{end}: {reason}")
    return 0


def _paced_chunks(path: str, pace_hz: float, header_lines: int = 1):
    """Replay a file line-by-line, sleeping to simulate live frame arrival."""
    delay = 0.0 if pace_hz <= 0 else 1.0 / pace_hz
    with open(path, "rb") as fh:
        for i, line in enumerate(fh):
            if delay and i > header_lines:
                time.sleep(delay)
            yield line


def cmd_watch(cfg: PipelineConfig, source: str, pace_hz: float,
              metrics_json: str | None) -> int:
    spec = exercise_preset(cfg.exercise)
    engine = load_engine(cfg.resolved_engine_path())
    forest = load_forest(cfg.resolved_forest_path())

    if source == "-":
        chunks = iter(lambda: sys.stdin.buffer.read(4096), b"")
    else:
        chunks = _paced_chunks(source, pace_hz) if pace_hz > 0 \
            else iter_file_chunks(source)
    stream = open_stream(chunks)

    work: queue.Queue = queue.Queue(maxsize=8)
    metrics = SessionMetrics()
    stream_error: list[Exception] = []

    def ingest():
        segmenter: OnlineSegmenter | None = None
        try:
            for frame in stream:
                if segmenter is None:
                    segmenter = OnlineSegmenter(spec, stream.header.frame_rate
                                                if stream.header else None)
                for event in segmenter.push(frame):
                    work.put((segmenter, event, time.perf_counter()))
            if segmenter is not None:
                for event in segmenter.finalize():
                    work.put((segmenter, event, time.perf_counter()))
        except ParseError as exc:
            stream_error.append(exc)
        finally:
            work.put(None)

    thread = threading.Thread(target=ingest, name="formsense-ingest", daemon=True)
    thread.start()

    exit_code = 0
    while True:
        item = work.get()
        if item is None:
            break
        segmenter, event, t_detect = item
        seg, verdict = prepare_stream_rep(segmenter, event, spec,
                                          cfg.smoothing, cfg.gate)
        if seg is None:
            print(f"rep {event.rep_index}: rejected ({verdict.reason})")
            continue
        seg = replace(seg, rep_index=event.rep_index)
        diag = diagnose_segment(engine, forest, spec, seg)
        compute_ms = (time.perf_counter() - t_detect) * 1e3
        diag.latency_ms = compute_ms
        metrics.detection_lags.append(event.detection_lag)
        metrics.compute_latencies.append(compute_ms)
        metrics.diagnoses.append(diag)
        print(_diagnosis_line(
            diag, extra=f", lag {event.detection_lag:.2f} s, compute {compute_ms:.1f} ms"))
    thread.join()
    print(metrics.summary())
    if stream_error:
        print(f"stream error: {stream_error[0]}", file=sys.stderr)
        exit_code = 3
    if metrics_json:
        _write_json(Path(metrics_json), metrics.to_dict())
    return exit_code


def cmd_export_plots(cfg: PipelineConfig, series_path: str,
                     engines: list[str]) -> int:
    spec = exercise_preset(cfg.exercise)
    series = read_series(series_path)
    prepared = prepare_series(series, spec, cfg.smoothing, cfg.gate)
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    bounds = prepared.boundaries
    kept = {p.index: p for p in bounds.kept_peaks}
    rejected = {p.index: p for p in bounds.rejected_peaks}
    signal_lines = ["frame,time,value,kept_peak,rejected_peak,prominence,cutoff"]
    for i, v in enumerate(prepared.pre.signal):
        peak = kept.get(i) or rejected.get(i)
        prom = f"{peak.prominence:.9g}" if peak else ""
        signal_lines.append(
            f"{i},{prepared.pre.timestamps[i]:.6f},{v:.9g},{int(i in kept)},"
            f"{int(i in rejected)},{prom},{bounds.cutoff:.9g}")
    (out_dir / "signal.csv").write_text("\n".join(signal_lines) + "\n")

    stick_lines = ["rep,frame,landmark,x,y"]
    for seg in prepared.segments:
        traj = np.asarray(seg.trajectories)
        for t in range(traj.shape[1]):
            for i, lm in enumerate(seg.landmarks):
                stick_lines.append(f"{seg.rep_index},{seg.start_frame + t},"
                                   f"{lm.value},{traj[i, t, 0]:.6f},{traj[i, t, 1]:.6f}")
    (out_dir / "stickfigure.csv").write_text("\n".join(stick_lines) + "\n")

    mse_lines = ["variant,rep,landmark,mse"]
    for spec_item in engines:
        if "=" not in spec_item:
            raise ConfigError("--engine expects VARIANT=CHECKPOINT")
        variant, path = spec_item.split("=", 1)
        engine = load_engine(path)
        for seg in prepared.segments:
            err = engine.rollout(seg)
            for i, lm in enumerate(err.landmarks):
                mse_lines.append(f"{variant},{seg.rep_index},{lm.value},"
                                 f"{err.per_landmark[i].mean():.9g}")
    (out_dir / "rollout_mse.csv").write_text("\n".join(mse_lines) + "\n")
    print(f"wrote {out_dir / 'signal.csv'}, {out_dir / 'stickfigure.csv'}, "
          f"{out_dir / 'rollout_mse.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formsense",
        description="Exercise-form diagnosis: rep counting, learned motion "
                    "rollouts, spectral error signatures, recommendations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--exercise")
        p.add_argument("--engine-variant",
                       choices=("in", "mlp", "attr-hidden", "indep", "fc", "gc"))
        p.add_argument("--data-dir")
        p.add_argument("--out-dir")

    p = sub.add_parser("generate", help="write synthetic landmark + truth files")
    common(p)
    p.add_argument("--dataset", action="store_true",
                   help="multi-class dataset instead of a single session")

    p = sub.add_parser("train", help="train engine + recommender from a dataset dir")
    common(p)
    p.add_argument("--tune", action="store_true",
                   help="randomized-search CV for the forest")
    p.add_argument("--full-eval", action="store_true",
                   help="repeated-split evaluation (eval_seeds seeds)")

    p = sub.add_parser("diagnose", help="per-rep diagnosis of a landmark file")
    common(p)
    p.add_argument("--engine")
    p.add_argument("--forest")
    p.add_argument("series")

    p = sub.add_parser("watch", help="stream diagnosis with latency metrics")
    common(p)
    p.add_argument("--engine")
    p.add_argument("--forest")
    p.add_argument("--pace", type=float, default=0.0,
                   help="replay pace in Hz (0 = as fast as possible)")
    p.add_argument("--metrics-json", help="write SessionMetrics to this path")
    p.add_argument("source", help="landmark file path or - for stdin")

    p = sub.add_parser("export-plots", help="tidy tables for redrawing figures")
    common(p)
    p.add_argument("--engine", action="append", default=[],
                   metavar="VARIANT=CHECKPOINT",
                   help="rollout-error table rows (repeatable)")
    p.add_argument("series")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, exercise=args.exercise,
                          engine_variant=args.engine_variant,
                          data_dir=args.data_dir, out_dir=args.out_dir)
        if getattr(args, "engine", None) and args.command in ("diagnose", "watch"):
            cfg.engine_path = Path(args.engine)
        if getattr(args, "forest", None):
            cfg.forest_path = Path(args.forest)
        if args.command == "generate":
            return cmd_generate(cfg, args.dataset)
        if args.command == "train":
            return cmd_train(cfg, args.full_eval)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, args.series)
        if args.command == "watch":
            return cmd_watch(cfg, args.source, args.pace, args.metrics_json)
        if args.command == "export-plots":
            return cmd_export_plots(cfg, args.series, args.engine)
        raise AssertionError(args.command)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
