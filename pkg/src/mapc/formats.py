"""JSON and CSV document formats.

Every document carries ``format_version`` (currently 1).  Boxes are
``[x_min, y_min, x_max, y_max]`` unless the document sets
``"box_format": "xywh"``, in which case they are converted on read.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .candidates import Detection, InvalidDetection
from .evaluation import EvalReport, GroundTruthObject, Prediction
from .geometry import BoundingBox, InvalidBox
from .inference import BACKGROUND, RegularizedResult
from .pipeline import MethodOutput, Scene
from .taxonomy import Taxonomy, UnknownClass

FORMAT_VERSION = 1


class InputFormatError(ValueError):
    def __init__(self, source: str, where: str, msg: str):
        super().__init__(f"{source}: {where}: {msg}")
        self.source = source
        self.where = where


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise InputFormatError(str(path), f"line {e.lineno}", e.msg) from e
    except OSError as e:
        raise InputFormatError(str(path), "file", e.strerror or str(e)) from e


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_json(path, doc: Any) -> None:
    write_text(path, dumps(doc))


def _check_version(doc, source):
    if not isinstance(doc, dict):
        raise InputFormatError(source, "document", "expected a JSON object")
    v = doc.get("format_version", FORMAT_VERSION)
    if v != FORMAT_VERSION:
        raise InputFormatError(source, "format_version", f"unsupported version {v!r}")


def _parse_box(raw, box_format: str, source: str, where: str) -> BoundingBox:
    if not (isinstance(raw, list) and len(raw) == 4):
        raise InputFormatError(source, where, "box must be a list of four numbers")
    try:
        vals = [float(v) for v in raw]
        if box_format == "xywh":
            return BoundingBox.from_xywh(*vals)
        return BoundingBox(*vals)
    except (TypeError, ValueError, InvalidBox) as e:
        raise InputFormatError(source, where, str(e)) from e


def _class_id(t: Taxonomy, name, source, where) -> int:
    try:
        return t.id_of(name)
    except UnknownClass:
        raise InputFormatError(source, where, f"unknown class {name!r}") from None


def _box_format(doc, source) -> str:
    fmt = doc.get("box_format", "xyxy")
    if fmt not in ("xyxy", "xywh"):
        raise InputFormatError(source, "box_format", f"unknown box format {fmt!r}")
    return fmt


def _image_size(doc) -> tuple[float, float]:
    img = doc.get("image") or {}
    return (float(img.get("width", 0.0)), float(img.get("height", 0.0)))


def parse_detections(doc, taxonomy: Taxonomy, source: str = "<detections>"):
    """Return ``(detections, image_size)`` from a detections document."""
    _check_version(doc, source)
    fmt = _box_format(doc, source)
    raw = doc.get("detections")
    if not isinstance(raw, list):
        raise InputFormatError(source, "detections", "expected a list")
    dets = []
    for k, rec in enumerate(raw):
        where = f"detections[{k}]"
        if not isinstance(rec, dict) or not isinstance(rec.get("scores"), dict):
            raise InputFormatError(source, where, "expected {box, scores}")
        box = _parse_box(rec.get("box"), fmt, source, where + ".box")
        scores = {}
        for name, s in rec["scores"].items():
            try:
                scores[_class_id(taxonomy, name, source, f"{where}.scores")] = float(s)
            except (TypeError, ValueError) as e:
                raise InputFormatError(source, f"{where}.scores.{name}", str(e)) from e
        try:
            dets.append(Detection(box, scores))
        except InvalidDetection as e:
            raise InputFormatError(source, where, str(e)) from e
    return dets, _image_size(doc)


def parse_ground_truth(doc, taxonomy: Taxonomy, source: str = "<ground truth>") -> list[GroundTruthObject]:
    _check_version(doc, source)
    fmt = _box_format(doc, source)
    raw = doc.get("objects")
    if not isinstance(raw, list):
        raise InputFormatError(source, "objects", "expected a list")
    out = []
    for k, rec in enumerate(raw):
        where = f"objects[{k}]"
        if not isinstance(rec, dict):
            raise InputFormatError(source, where, "expected {box, class_name}")
        box = _parse_box(rec.get("box"), fmt, source, where + ".box")
        out.append(GroundTruthObject(box, _class_id(taxonomy, rec.get("class_name"), source, where)))
    return out


def parse_predictions(doc, taxonomy: Taxonomy, source: str = "<predictions>") -> list[Prediction]:
    """Read the ``detections`` list of a results document."""
    _check_version(doc, source)
    fmt = _box_format(doc, source)
    raw = doc.get("detections")
    if not isinstance(raw, list):
        raise InputFormatError(source, "detections", "expected a list")
    out = []
    for k, rec in enumerate(raw):
        where = f"detections[{k}]"
        if not isinstance(rec, dict):
            raise InputFormatError(source, where, "expected an object")
        box = _parse_box(rec.get("box"), fmt, source, where + ".box")
        cls = _class_id(taxonomy, rec.get("class_name"), source, where)
        try:
            score = float(rec.get("score", 1.0))
        except (TypeError, ValueError) as e:
            raise InputFormatError(source, where + ".score", str(e)) from e
        out.append(Prediction(box, cls, score))
    return out


def detections_doc(dets: Sequence[Detection], image_size, taxonomy: Taxonomy) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "image": {"width": image_size[0], "height": image_size[1]},
        "detections": [
            {"box": d.box.as_list(),
             "scores": {taxonomy.name_of(c): s for c, s in d.scores.items()}}
            for d in dets
        ],
    }


def ground_truth_doc(gt: Sequence[GroundTruthObject], image_size, taxonomy: Taxonomy) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "image": {"width": image_size[0], "height": image_size[1]},
        "objects": [{"box": g.box.as_list(), "class_name": taxonomy.name_of(g.class_id)} for g in gt],
    }


def results_doc(out: MethodOutput, taxonomy: Taxonomy) -> dict:
    clustered = out.result is not None
    boxes = out.candidates.boxes
    sel = []
    for s in out.selected:
        rec = {
            "box": boxes[s.box_id].as_list(),
            "class_name": taxonomy.name_of(s.class_id),
            "class_id": s.class_id,
            "score": s.score,
            "exemplar": True,
        }
        if clustered:
            rec["cluster_id"] = s.cluster_id
        sel.append(rec)
    doc = {"format_version": FORMAT_VERSION, "method": out.method, "detections": sel}
    if clustered:
        r = out.result
        doc["members"] = [
            {"point_id": i, "box_id": p.box_id, "class_name": taxonomy.name_of(p.class_id),
             "score": p.score,
             "exemplar_point_id": None if int(r.assignment[i]) == BACKGROUND else int(r.assignment[i])}
            for i, p in enumerate(out.candidates.points)
        ]
        doc["objective_value"] = r.objective_value
        doc["iterations_run"] = r.iterations_run
        doc["converged"] = r.converged
    return doc


def _assign_list(a) -> list:
    return [None if int(j) == BACKGROUND else int(j) for j in a]


def trace_doc(out: MethodOutput, taxonomy: Taxonomy, trace) -> dict:
    r: RegularizedResult = out.result
    return {
        "format_version": FORMAT_VERSION,
        "method": out.method,
        "points": [
            {"point_id": p.point_id, "box_id": p.box_id,
             "class_name": taxonomy.name_of(p.class_id), "score": p.score}
            for p in out.candidates.points
        ],
        "snapshots": [
            {"iteration": t, "assignment": _assign_list(a),
             "exemplars": [int(i) for i, j in enumerate(a) if int(j) == i]}
            for t, a in enumerate(trace)
        ],
        "iterations_run": r.iterations_run,
        "converged": r.converged,
    }


def report_doc(report: EvalReport) -> dict:
    return {"format_version": FORMAT_VERSION, **report.as_dict()}


def report_table(report: EvalReport, label: str = "") -> str:
    """Aligned text table with the metrics in percent."""
    cols = ["Method", "Precision", "Recall", "Wrong Label", "Wrong Overlap", "F1 Score", "TP", "FP", "FN"]
    vals = [label or "-",
            f"{100 * report.precision:.2f}", f"{100 * report.recall:.2f}",
            f"{100 * report.wrong_label_fraction:.2f}", f"{100 * report.wrong_overlap_fraction:.2f}",
            f"{100 * report.f1:.2f}", str(report.tp), str(report.fp), str(report.fn)]
    widths = [max(len(c), len(v)) for c, v in zip(cols, vals)]
    line1 = "  ".join(c.rjust(w) for c, w in zip(cols, widths))
    line2 = "  ".join(v.rjust(w) for v, w in zip(vals, widths))
    return line1 + "\n" + line2 + "\n"


def curve_csv(param: str, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([param, "precision", "recall", "f1", "wrong_label", "wrong_overlap", "tp", "fp", "fn"])
    for value, r in rows:
        w.writerow([value, repr(r.precision), repr(r.recall), repr(r.f1),
                    repr(r.wrong_label_fraction), repr(r.wrong_overlap_fraction), r.tp, r.fp, r.fn])
    return buf.getvalue()


def scene_set_doc(scenes: Sequence[Scene], taxonomy: Taxonomy) -> dict:
    out = []
    for s in scenes:
        d = detections_doc(s.detections, s.image_size, taxonomy)
        g = ground_truth_doc(s.ground_truth, s.image_size, taxonomy)
        out.append({"name": s.name, "image": d["image"], "detections": d["detections"],
                    "objects": g["objects"]})
    return {"format_version": FORMAT_VERSION, "scenes": out}


def parse_scene_set(doc, taxonomy: Taxonomy, source: str = "<scenes>") -> list[Scene]:
    _check_version(doc, source)
    raw = doc.get("scenes")
    if not isinstance(raw, list):
        raise InputFormatError(source, "scenes", "expected a list")
    scenes = []
    for k, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise InputFormatError(source, f"scenes[{k}]", "expected an object")
        sub = f"{source}: scenes[{k}]"
        dets, size = parse_detections({**rec, "format_version": FORMAT_VERSION}, taxonomy, sub)
        gt = parse_ground_truth({**rec, "format_version": FORMAT_VERSION,
                                 "objects": rec.get("objects", [])}, taxonomy, sub)
        scenes.append(Scene(dets, gt, size, str(rec.get("name", k))))
    return scenes
