"""Command-line entry point for the harness.

Exit codes: 0 ok, 2 config/usage error, 3 data error (manifest, CTM,
stop log), 4 detector attach/protocol failure, 5 completed with some
errored sessions. Verbosity is controlled by the SID_HARNESS_LOG
environment variable (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import annotation, cropgen, detectors, metrics, report, streaming
from .manifest import (EvalInstance, ManifestError, load_manifest,
                       read_expected_composition, summarize, validate_composition)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DETECTOR = 4
EXIT_PARTIAL = 5

log = logging.getLogger("sid_harness")


def _setup_logging() -> None:
    level = os.environ.get("SID_HARNESS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _read_config_file(path: str | None) -> dict:
    """key = value config file; flags given on the command line win."""
    if not path:
        return {}
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                raw = raw.strip()
                if not raw or raw.startswith("#"):
                    continue
                if "=" not in raw:
                    raise click.UsageError(f"{path}: line {line_no}: expected key = value")
                key, _, value = raw.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as e:
        raise click.UsageError(f"cannot read config file: {e}")
    return values


@click.group()
@click.option("--config", "config_file", type=click.Path(), default=None,
              help="key = value defaults file; explicit flags override it.")
@click.pass_context
def main(ctx, config_file):
    """Streaming evaluation harness for barge-in detection."""
    _setup_logging()
    values = _read_config_file(config_file)
    if not values:
        return
    # config keys use flag names; map them onto each command's parameter names
    default_map = {}
    for name, cmd in main.commands.items():
        sub = {}
        for param in cmd.params:
            for opt in param.opts:
                key = opt.lstrip("-").replace("-", "_")
                if key in values:
                    sub[param.name] = values[key]
        default_map[name] = sub
    ctx.default_map = default_map


def _load_instances(manifest_path: str) -> list[EvalInstance]:
    try:
        return load_manifest(manifest_path)
    except ManifestError as e:
        click.echo(f"manifest error: {e}", err=True)
        sys.exit(EXIT_DATA)


def _make_factory(spec: str, chunk_ms: int, feed_mode: str,
                  energy_params: detectors.EnergyVadParams,
                  timeout_ms: int) -> streaming.DetectorFactory:
    if spec.startswith("external:"):
        parts = spec.split(":", 2)
        if len(parts) != 3 or parts[1] not in ("subprocess", "tcp"):
            raise click.UsageError(
                "external detector spec must be external:subprocess:<cmd> or external:tcp:host:port")
        ext = detectors.ExternalSpec(transport=parts[1], address_or_cmd=parts[2],
                                     timeout_ms=timeout_ms)

        def factory(instance: EvalInstance) -> detectors.Detector:
            return detectors.ExternalDetector(ext, sample_rate_hz=instance.sample_rate_hz,
                                              chunk_ms=chunk_ms, feed_mode=feed_mode.lower())
        return factory

    if spec not in detectors.BUILTIN_DETECTORS:
        raise click.UsageError(f"unknown detector {spec!r} "
                               f"(built-ins: {', '.join(detectors.BUILTIN_DETECTORS)})")

    def factory(instance: EvalInstance) -> detectors.Detector:
        return detectors.make_builtin(spec, instance=instance,
                                      sample_rate_hz=instance.sample_rate_hz,
                                      energy_params=energy_params)
    return factory


def _write_outcomes(path: Path, outcomes: list[metrics.Outcome]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(json.dumps({
                "id": o.instance_id, "kind": o.kind.value, "penalty_s": o.penalty_s,
                "language": o.language.value if o.language else None,
                "category": o.category,
            }) + "\n")


def _write_reports(out_dir: Path, system_name: str, outcomes: list[metrics.Outcome],
                   footnotes: list[str]) -> None:
    blocks, micro, macro = metrics.aggregate(outcomes)
    rows = {system_name: (blocks, micro, macro)}
    (out_dir / "report.csv").write_text(
        report.render_table(rows, report.TableFormat.CSV), encoding="utf-8")
    (out_dir / "report.txt").write_text(
        report.render_table(rows, report.TableFormat.ALIGNED, footnotes=footnotes),
        encoding="utf-8")
    fan = [o for o in outcomes if o.category in ("Silence", "Noise")]
    if fan:
        (out_dir / "fan_report.txt").write_text(
            report.render_fan_table(fan), encoding="utf-8")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--detector", "detector_spec", required=True,
              help="oracle | energy | always | never | external:subprocess:<cmd> | external:tcp:host:port")
@click.option("--chunk-ms", default=100, show_default=True, type=int)
@click.option("--k", "k_consecutive", default=3, show_default=True, type=int)
@click.option("--feed-mode", default="Incremental", show_default=True,
              type=click.Choice(["Incremental", "Cumulative"]))
@click.option("--fp-penalty-mode", default="FullTurn", show_default=True,
              type=click.Choice(["FullTurn", "RemainingTurn"]))
@click.option("--realtime", is_flag=True, default=False)
@click.option("--parallelism", default=1, show_default=True, type=int)
@click.option("--output-dir", default="out", show_default=True, type=click.Path())
@click.option("--threshold-dbfs", default=-40.0, show_default=True, type=float)
@click.option("--min-speech-ms", default=100, show_default=True, type=int)
@click.option("--frame-ms", default=25, show_default=True, type=int)
@click.option("--hop-ms", default=10, show_default=True, type=int)
@click.option("--timeout-ms", default=2000, show_default=True, type=int,
              help="External detector reply timeout.")
def evaluate(manifest_path, detector_spec, chunk_ms, k_consecutive, feed_mode,
             fp_penalty_mode, realtime, parallelism, output_dir,
             threshold_dbfs, min_speech_ms, frame_ms, hop_ms, timeout_ms):
    """Replay a manifest against a detector and score every session."""
    try:
        config = streaming.SessionConfig(chunk_ms=chunk_ms, k_consecutive=k_consecutive,
                                         realtime=realtime,
                                         feed_mode=streaming.FeedMode(feed_mode))
        energy_params = detectors.EnergyVadParams(
            frame_ms=frame_ms, hop_ms=hop_ms, threshold_dbfs=threshold_dbfs,
            min_speech_ms=min_speech_ms)
    except ValueError as e:
        raise click.UsageError(str(e))
    factory = _make_factory(detector_spec, chunk_ms, feed_mode, energy_params, timeout_ms)
    instances = _load_instances(manifest_path)
    mode = metrics.FpPenaltyMode(fp_penalty_mode)

    try:
        results = streaming.run_suite(instances, factory, config, parallelism)
    except detectors.DetectorError as e:
        click.echo(f"detector error [{e.code}]: {e}", err=True)
        sys.exit(EXIT_DETECTOR)

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "traces.jsonl", "w", encoding="utf-8") as fh:
        for line in streaming.dump_trace_lines(results):
            fh.write(line + "\n")

    by_id = {inst.id: inst for inst in instances}
    outcomes: list[metrics.Outcome] = []
    errored: list[tuple[str, str]] = []
    for instance_id, trace in results:
        if trace.errored:
            errored.append((instance_id, f"[{trace.error_code}] {trace.error}"))
            continue
        outcomes.append(metrics.classify_outcome(by_id[instance_id], trace.stop, mode))

    _write_outcomes(out_dir / "outcomes.jsonl", outcomes)
    if outcomes:
        footnotes = [f"detector={detector_spec} chunk_ms={chunk_ms} K={k_consecutive} "
                     f"fp_penalty_mode={fp_penalty_mode} feed_mode={feed_mode}",
                     "Average columns: AvgMicro pools all cases; AvgMacro averages groups."]
        _write_reports(out_dir, detector_spec, outcomes, footnotes)

    if errored:
        click.echo(f"{len(errored)} of {len(results)} sessions errored:", err=True)
        for instance_id, msg in errored:
            click.echo(f"  {instance_id}: {msg}", err=True)
        sys.exit(EXIT_DETECTOR if not outcomes else EXIT_PARTIAL)
    click.echo(f"evaluated {len(outcomes)} instances -> {out_dir}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--stop-log", "stop_log_path", required=True, type=click.Path())
@click.option("--fp-penalty-mode", default="FullTurn", show_default=True,
              type=click.Choice(["FullTurn", "RemainingTurn"]))
@click.option("--output-dir", default="out", show_default=True, type=click.Path())
def score(manifest_path, stop_log_path, fp_penalty_mode, output_dir):
    """Score externally measured stop times from a stop log."""
    instances = _load_instances(manifest_path)
    try:
        stop_log = metrics.parse_stop_log(stop_log_path)
        outcomes = metrics.score_from_log(instances, stop_log,
                                          metrics.FpPenaltyMode(fp_penalty_mode))
    except metrics.ScoringError as e:
        click.echo(f"scoring error: {e}", err=True)
        sys.exit(EXIT_DATA)

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_outcomes(out_dir / "outcomes.jsonl", outcomes)
    _write_reports(out_dir, "stop-log", outcomes,
                   [f"scored from {stop_log_path} fp_penalty_mode={fp_penalty_mode}"])
    click.echo(f"scored {len(outcomes)} instances -> {out_dir}")


@main.command()
@click.option("--ctm", "ctm_path", required=True, type=click.Path())
@click.option("--tagged", "tagged_path", required=True, type=click.Path(),
              help="Plain-text transcript containing one <break> tag.")
@click.option("--id", "record_id", default=None, help="Record id (default: tagged file stem).")
@click.option("--out", "out_path", default="fusion.jsonl", show_default=True, type=click.Path())
@click.option("--char-level", is_flag=True, default=False,
              help="Split CJK runs into single-character tokens.")
def fuse(ctm_path, tagged_path, record_id, out_path, char_level):
    """Fuse a break-tagged transcript with CTM word timestamps."""
    try:
        alignments = annotation.parse_ctm(ctm_path)
        text = Path(tagged_path).read_text(encoding="utf-8")
        transcript = annotation.locate_break(text, char_level=char_level)
        if transcript.break_index is None:
            click.echo("no <break> tag in transcript; nothing to fuse", err=True)
            sys.exit(EXIT_DATA)
        result = annotation.fuse(transcript, alignments)
    except annotation.AnnotationError as e:
        click.echo(f"fusion error: {e}", err=True)
        sys.exit(EXIT_DATA)
    except OSError as e:
        click.echo(f"cannot read input: {e}", err=True)
        sys.exit(EXIT_DATA)

    record = {"id": record_id or Path(tagged_path).stem,
              "break_time_s": result.break_time_s,
              "matched_word": result.matched_word,
              "alignment_cost": result.alignment_cost}
    with open(out_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")
    click.echo(json.dumps(record))


@main.command(name="cropgen")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--ctm", "ctm_path", default=None, type=click.Path(),
              help="CTM with utterance ids matching instance ids (needed for instances with breaks).")
@click.option("--n", "n_clips", default=6, show_default=True, type=int)
@click.option("--min-clip-s", default=0.5, show_default=True, type=float)
@click.option("--boundary-window-s", default=0.5, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-dir", default="clips", show_default=True, type=click.Path())
@click.option("--emit-audio", is_flag=True, default=False)
def cropgen_cmd(manifest_path, ctm_path, n_clips, min_clip_s, boundary_window_s,
                seed, out_dir, emit_audio):
    """Generate labeled training clips by randomized temporal cropping."""
    instances = _load_instances(manifest_path)
    alignments_by_utt: dict[str, list[annotation.WordAlignment]] = {}
    if ctm_path:
        try:
            for row in annotation.parse_ctm(ctm_path):
                alignments_by_utt.setdefault(row.utterance_id, []).append(row)
        except annotation.AnnotationError as e:
            click.echo(f"ctm error: {e}", err=True)
            sys.exit(EXIT_DATA)

    config = cropgen.CropConfig(n_clips_per_utt=n_clips, min_clip_s=min_clip_s,
                                boundary_window_s=boundary_window_s, seed=seed)
    clips: list[cropgen.ClipSample] = []
    try:
        for inst in instances:
            clips.extend(cropgen.generate_clips(inst, alignments_by_utt.get(inst.id), config))
        path = cropgen.export_clips(clips, out_dir,
                                    sources={i.id: i for i in instances},
                                    emit_audio=emit_audio)
    except (cropgen.CropError, annotation.AnnotationError) as e:
        click.echo(f"cropgen error: {e}", err=True)
        sys.exit(EXIT_DATA)
    click.echo(f"wrote {len(clips)} clips -> {path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--expect", "expect_path", default=None, type=click.Path(),
              help="JSON file {\"expected_counts\": {lang: {category: n}}}; "
                   "defaults to the manifest's header record.")
def validate(manifest_path, expect_path):
    """Check a manifest's integrity and composition."""
    instances = _load_instances(manifest_path)
    summary = summarize(instances)

    if expect_path:
        from .manifest import Category, CorpusSummary, Language
        try:
            payload = json.loads(Path(expect_path).read_text(encoding="utf-8"))
            counts = {(Language(lang), Category(cat)): int(n)
                      for lang, by_cat in payload["expected_counts"].items()
                      for cat, n in by_cat.items()}
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
            click.echo(f"cannot read expected composition: {e}", err=True)
            sys.exit(EXIT_DATA)
        expected = CorpusSummary(counts=counts, total=sum(counts.values()))
    else:
        expected = read_expected_composition(manifest_path)
        if expected is None:
            click.echo(f"manifest OK: {summary.total} instances, "
                       f"{summary.total_audio_s:.1f}s audio (no expected composition declared)")
            return

    discrepancies = validate_composition(summary, expected)
    if discrepancies:
        for d in discrepancies:
            click.echo(f"composition mismatch {d.bucket[0].value}/{d.bucket[1].value}: "
                       f"expected {d.expected}, got {d.actual}", err=True)
        sys.exit(EXIT_DATA)
    click.echo(f"composition OK: {summary.total} instances, {summary.total_audio_s:.1f}s audio")


if __name__ == "__main__":
    main()
