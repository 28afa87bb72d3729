"""Command-line front end.

Exit codes: 0 success, 2 input format error, 3 configuration error,
4 internal invariant violation.  Data goes to standard output (or --out),
progress and errors to standard error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from . import formats
from .candidates import expand_detections
from .config import KNOBS, ConfigError, RunConfig
from .evaluation import UnknownParameter, compute_report, evaluate_scene, sweep
from .formats import InputFormatError
from .inference import check_assignment
from .oracle import InstanceTooLarge, brute_force_regularize
from .pipeline import METHODS, UnknownMethod, run_method
from .similarity import build_similarity_model
from .synthesis import SceneSpec, SpecInvalid, generate_suite
from .taxonomy import MalformedTaxonomy, Taxonomy, load_taxonomy
from .tuning import GridTooLarge, ParamGrid, grid_search

log = logging.getLogger("mapc")

EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 2, 3, 4


class InvariantViolation(RuntimeError):
    pass


def fixture_taxonomy_path():
    return resources.files("mapc") / "data" / "fixture_taxonomy.json"


def _taxonomy(args) -> Taxonomy:
    path = args.taxonomy or fixture_taxonomy_path()
    try:
        return load_taxonomy(path)
    except MalformedTaxonomy as e:
        raise InputFormatError(str(path), "taxonomy", str(e)) from e


def _config(args, taxonomy) -> RunConfig:
    if not args.config:
        return RunConfig()
    return RunConfig.from_dict(formats.read_json(args.config), taxonomy)


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


def _load_detections(path, taxonomy):
    return formats.parse_detections(formats.read_json(path), taxonomy, str(path))


def _checked(out, taxonomy):
    r = out.result
    if r is not None:
        problem = check_assignment(r.assignment, None if out.method != "mapc" else out.candidates.box_ids)
        if problem:
            raise InvariantViolation(problem)
    return out


def cmd_regularize(args) -> int:
    tax = _taxonomy(args)
    cfg = _config(args, tax)
    if args.trace:
        cfg = _with_trace(cfg)
    dets, _ = _load_detections(args.detections, tax)
    out = _checked(run_method(args.method, dets, tax, cfg), tax)
    formats.write_json(args.out, formats.results_doc(out, tax))
    if args.trace and out.result is not None:
        formats.write_json(args.trace, formats.trace_doc(out, tax, out.result.trace))
    log.info("%s: %d of %d candidates selected", args.method, len(out.selected), len(out.candidates))
    return 0


def _with_trace(cfg: RunConfig) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, inference=replace(cfg.inference, trace_enabled=True))


def cmd_trace(args) -> int:
    tax = _taxonomy(args)
    cfg = _with_trace(_config(args, tax))
    if args.method not in ("mapc", "sapc"):
        raise ConfigError("trace supports the mapc and sapc methods")
    dets, _ = _load_detections(args.detections, tax)
    out = _checked(run_method(args.method, dets, tax, cfg), tax)
    formats.write_json(args.out, formats.trace_doc(out, tax, out.result.trace))
    return 0


def cmd_eval(args) -> int:
    tax = _taxonomy(args)
    cfg = _config(args, tax)
    pred = formats.parse_predictions(formats.read_json(args.predictions), tax, str(args.predictions))
    gt = formats.parse_ground_truth(formats.read_json(args.ground_truth), tax, str(args.ground_truth))
    report = compute_report(evaluate_scene(pred, gt, tax, cfg.evaluation))
    if args.out:
        formats.write_json(args.out, formats.report_doc(report))
    if args.csv:
        formats.write_text(args.csv, formats.curve_csv("iou_threshold", [(cfg.evaluation.iou_threshold, report)]))
    sys.stdout.write(formats.report_table(report, label=Path(args.predictions).stem))
    return 0


def _load_scenes(path, tax):
    return formats.parse_scene_set(formats.read_json(path), tax, str(path))


def _parse_value(text: str):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"sweep value {text!r} is not a number") from None
    return int(v) if v.is_integer() and "." not in text else v


def cmd_sweep(args) -> int:
    tax = _taxonomy(args)
    cfg = _config(args, tax)
    scenes = _load_scenes(args.scenes, tax)
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    rows = sweep(args.method, args.param, values, scenes, tax, cfg, threads=_threads(args))
    formats.write_text(args.out, formats.curve_csv(args.param, rows))
    return 0


def cmd_synth(args) -> int:
    tax = _taxonomy(args)
    doc = formats.read_json(args.spec)
    if not isinstance(doc, dict):
        raise InputFormatError(str(args.spec), "document", "expected a JSON object")
    doc = dict(doc)
    count = int(doc.pop("count", 1))
    first_seed = int(doc.pop("rng_seed", 0))
    if args.seed is not None:
        first_seed = args.seed
    spec = SceneSpec.from_dict(doc, tax)
    scenes = generate_suite(spec, tax, count, first_seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, s in enumerate(scenes):
        formats.write_json(out / f"scene_{k:04d}.detections.json",
                           formats.detections_doc(s.detections, s.image_size, tax))
        formats.write_json(out / f"scene_{k:04d}.gt.json",
                           formats.ground_truth_doc(s.ground_truth, s.image_size, tax))
    formats.write_json(out / "scenes.json", formats.scene_set_doc(scenes, tax))
    log.info("wrote %d scenes to %s", count, out)
    return 0


def cmd_tune(args) -> int:
    tax = _taxonomy(args)
    cfg = _config(args, tax)
    gdoc = formats.read_json(args.grid)
    if not isinstance(gdoc, dict) or not isinstance(gdoc.get("axes"), dict):
        raise InputFormatError(str(args.grid), "axes", "grid document needs an 'axes' object")
    try:
        grid = ParamGrid({k: list(v) for k, v in gdoc["axes"].items()})
    except (UnknownParameter, ValueError, TypeError) as e:
        raise ConfigError(f"bad grid: {e}") from e
    objective = args.objective or gdoc.get("objective", "f1")
    if objective not in ("f1", "precision"):
        raise ConfigError(f"unknown tuning objective {objective!r}")
    floor = args.recall_floor if args.recall_floor is not None else float(gdoc.get("recall_floor", 0.0))
    scenes = _load_scenes(args.scenes, tax)
    res = grid_search(grid, scenes, args.method, tax, cfg, objective, floor, threads=_threads(args))
    formats.write_json(args.out, {
        "format_version": formats.FORMAT_VERSION,
        "method": args.method,
        "objective": objective,
        "best_params": res.best_params,
        "best_score": res.best_score,
        "table": [{"params": p, "score": s, **r.as_dict()} for p, r, s in res.table],
    })
    return 0


def cmd_oracle(args) -> int:
    tax = _taxonomy(args)
    cfg = _config(args, tax)
    dets, _ = _load_detections(args.detections, tax)
    cands = expand_detections(dets, cfg.similarity.theta_bg, cfg.candidates.top_k, cfg.candidates.top_n)
    if len(cands) == 0:
        best, value, count = [], 0.0, 1
    else:
        model = build_similarity_model(cands, tax, cfg.similarity)
        res = brute_force_regularize(model, cfg.weights, cands.box_ids)
        best, value, count = formats._assign_list(res.best_assignment), res.best_value, res.enumerated_count
    formats.write_json(args.out, {
        "format_version": formats.FORMAT_VERSION,
        "n": len(cands),
        "points": [{"point_id": p.point_id, "box_id": p.box_id,
                    "class_name": tax.name_of(p.class_id), "score": p.score} for p in cands.points],
        "best_assignment": best,
        "best_value": value,
        "enumerated_count": count,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mapc", description="Spatial-semantic regularisation of object detections.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, method_default=None, methods=METHODS):
        sp.add_argument("--taxonomy", help="taxonomy document (default: bundled fixture)")
        sp.add_argument("--config", help="run configuration document")
        sp.add_argument("--out", help="output path (default: standard output)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        sp.add_argument("--seed", type=int, default=None)
        if method_default:
            sp.add_argument("--method", default=method_default, choices=methods)

    sp = sub.add_parser("regularize", help="select final detections")
    sp.add_argument("detections")
    common(sp, "mapc")
    sp.add_argument("--trace", help="also write the per-iteration trace here (mapc/sapc)")
    sp.set_defaults(func=cmd_regularize)

    sp = sub.add_parser("baseline", help="regularize with an NMS baseline")
    sp.add_argument("detections")
    common(sp, "wcacnms")
    sp.add_argument("--trace", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_regularize)

    sp = sub.add_parser("eval", help="score predictions against ground truth")
    sp.add_argument("predictions")
    sp.add_argument("ground_truth")
    common(sp)
    sp.add_argument("--csv", help="also write the report as CSV")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="precision/recall curve over one knob")
    sp.add_argument("scenes")
    common(sp, "mapc")
    sp.add_argument("--param", required=True, help="knob name: " + ", ".join(sorted(KNOBS)))
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synth", help="generate synthetic scenes")
    sp.add_argument("spec")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("tune", help="grid-search a method's knobs")
    sp.add_argument("grid")
    sp.add_argument("scenes")
    common(sp, "mapc")
    sp.add_argument("--objective", choices=["f1", "precision"])
    sp.add_argument("--recall-floor", type=float, default=None)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("trace", help="per-iteration exemplar snapshots")
    sp.add_argument("detections")
    common(sp, "mapc", ("mapc", "sapc"))
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("oracle", help="exhaustive optimum for a small instance")
    sp.add_argument("detections")
    common(sp)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "out", None) is None and args.command == "synth":
        print("mapc: synth needs --out DIR", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InputFormatError as e:
        print(f"mapc: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, UnknownParameter, UnknownMethod, SpecInvalid, GridTooLarge,
            InstanceTooLarge) as e:
        print(f"mapc: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # anything else is a bug
        log.exception("internal error")
        print(f"mapc: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
