"""Acceptance suite: one group of checks per criterion.

Each group is tagged with ``@pytest.mark.criterion`` and the run ends with a
PASS/FAIL line per criterion (see ``conftest.py``).  Run it alone with

    pytest tests/test_acceptance.py -v
"""

import os
import time

import numpy as np
import pytest
from conftest import fixture_taxonomy, golden, random_detections

from mapc import data, formats
from mapc.baselines import NmsParams, wc_ac_nms
from mapc.candidates import CandidatePoint, CandidateSet, expand_detections
from mapc.cli import main
from mapc.config import RunConfig
from mapc.evaluation import f1_score
from mapc.geometry import BoundingBox, iou
from mapc.inference import (
    BACKGROUND, InferenceConfig, ObjectiveWeights, check_assignment, mapc_cluster, sapc_cluster,
)
from mapc.oracle import brute_force_regularize
from mapc.pipeline import evaluate_scenes
from mapc.similarity import SimilarityParams, build_similarity_model
from mapc.synthesis import SceneSpec, generate_suite
from mapc.taxonomy import lin_similarity
from mapc.tuning import ParamGrid, grid_search

THREADS = os.cpu_count() or 1

# --------------------------------------------------------------------------
# 1. published F1 values follow from the published precision and recall

PUBLISHED = [
    # (table, method, precision, recall, f1), all in percent
    ("coco", "wcacnms", 13.44, 13.47, 13.46),
    ("coco", "sapc", 5.25, 20.72, 8.38),
    ("coco", "sapc+acnms", 14.66, 11.86, 13.12),
    ("coco", "mapc", 16.60, 13.84, 15.09),
    ("coco-finetuned", "wcacnms", 23.50, 24.80, 24.10),
    ("coco-finetuned", "sapc", 15.66, 32.61, 21.17),
    ("coco-finetuned", "sapc+acnms", 30.01, 21.97, 25.39),
    ("coco-finetuned", "mapc", 37.64, 24.23, 29.50),
    ("imagenet", "wcacnms", 8.34, 11.29, 9.59),
    ("imagenet", "sapc", 3.46, 22.57, 6.00),
    ("imagenet", "sapc+acnms", 9.76, 10.34, 10.04),
    ("imagenet", "mapc", 10.94, 16.22, 13.07),
    ("coco-vgg", "wcacnms", 11.26, 29.41, 16.29),
    ("coco-vgg", "sapc", 21.11, 32.39, 25.56),
    ("coco-vgg", "sapc+acnms", 32.96, 23.84, 27.67),
    ("coco-vgg", "mapc", 37.23, 31.21, 33.96),
]


@pytest.mark.criterion(1, "F1 from published precision/recall within 0.01 points")
@pytest.mark.parametrize("table, method, p, r, f", PUBLISHED, ids=[f"{t}-{m}" for t, m, *_ in PUBLISHED])
def test_published_f1_arithmetic(table, method, p, r, f):
    got = 100 * f1_score(p / 100, r / 100)
    assert abs(got - f) <= 0.01 + 1e-9, f"{table}/{method}: F1({p}, {r}) = {got:.4f}, published {f}"


# --------------------------------------------------------------------------
# 2. near-optimality against the exhaustive oracle


def oracle_instance(seed: int):
    """2-8 points on a few overlapping boxes with labels from one sibling family."""
    tax = fixture_taxonomy()
    leaves = tax.leaves()
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    n_boxes = int(rng.integers(1, n + 1))
    centres = rng.uniform(20, 80, size=(max(1, n_boxes // 2), 2))
    boxes = []
    for _ in range(n_boxes):
        c = centres[rng.integers(len(centres))] + rng.normal(0, 4, 2)
        wh = rng.uniform(10, 30, 2)
        boxes.append(BoundingBox(*(c - wh / 2), *(c + wh / 2)))
    family = rng.choice(leaves, size=3)
    pts, used = [], set()
    while len(pts) < n:
        k = len(pts)
        b = k if k < n_boxes else int(rng.integers(n_boxes))
        cls = int(rng.choice(family))
        if rng.random() < 0.5 and tax.siblings(cls):
            cls = int(rng.choice(tax.siblings(cls)))
        if (b, cls) in used:
            continue
        used.add((b, cls))
        pts.append(CandidatePoint(k, b, cls, float(rng.uniform(0.35, 1.0))))
    cands = CandidateSet(pts, boxes, n_boxes, 0.3)
    return cands, build_similarity_model(cands, tax, SimilarityParams())


@pytest.mark.criterion(2, "MAPC >= 0.95 x oracle optimum on >= 90% of 200 instances, all feasible")
def test_oracle_near_optimality():
    w = ObjectiveWeights()
    t0 = time.perf_counter()
    good = feasible = 0
    for seed in range(200):
        cands, m = oracle_instance(seed)
        r = mapc_cluster(cands, m, w)
        best = brute_force_regularize(m, w, cands.box_ids).best_value
        feasible += check_assignment(r.assignment, cands.box_ids) is None
        good += r.objective_value >= 0.95 * best - 1e-12
    elapsed = time.perf_counter() - t0
    print(f"near-optimal {good}/200, feasible {feasible}/200, {elapsed:.1f}s")
    assert feasible == 200
    assert good >= 180
    assert elapsed < 60


# --------------------------------------------------------------------------
# 3. constraint invariants over 10,000 random cases

CASES_PER_PROPERTY = 2500


@pytest.mark.criterion(3, "10,000-case constraint property suite with zero violations")
def test_constraint_invariants():
    tax = fixture_taxonomy()
    leaves = tax.leaves()
    t0 = time.perf_counter()
    cfg = InferenceConfig(max_iterations=100)
    violations = []

    for seed in range(CASES_PER_PROPERTY):
        rng = np.random.default_rng([3, seed])
        cands = expand_detections(random_detections(rng, tax, int(rng.integers(1, 7)), max_labels=3), 0.3)
        params = SimilarityParams(lam=float(rng.uniform(0, 1)))
        w = ObjectiveWeights(w_a=float(rng.uniform(0.01, 1)), w_d=float(rng.uniform(0, 0.5)),
                             background_affinity=float(rng.uniform(-1, 0.2)))
        if seed % 2 == 0:
            r = mapc_cluster(cands, build_similarity_model(cands, tax, params), w, cfg)
            problem = check_assignment(r.assignment, cands.box_ids)
        else:
            r = sapc_cluster(cands, params, w, cfg)
            problem = check_assignment(r.assignment, None)
            # exemplars never absorb points of another class
            for i, j in enumerate(r.assignment):
                if j != BACKGROUND and cands.points[i].class_id != cands.points[j].class_id:
                    problem = f"point {i} joined an exemplar of another class"
        if problem is None and r.exemplar_ids != sorted({int(j) for j in r.assignment if j != BACKGROUND}):
            problem = "selected does not match the self-assigned points"
        if problem:
            violations.append(("clustering", seed, problem))

    for seed in range(CASES_PER_PROPERTY):
        rng = np.random.default_rng([4, seed])
        cands = expand_detections(random_detections(rng, tax, int(rng.integers(0, 12)), max_labels=2), 0.3)
        params = NmsParams(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        kept = wc_ac_nms(cands.points, cands.boxes, params)
        ids = [p.point_id for p in kept]
        if len(set(ids)) != len(ids) or not set(ids) <= {p.point_id for p in cands.points}:
            violations.append(("nms", seed, "not a subset"))
        for a in range(len(kept)):
            for b in range(a + 1, len(kept)):
                if iou(cands.boxes[kept[a].box_id], cands.boxes[kept[b].box_id]) > params.iou_across:
                    violations.append(("nms", seed, "overlapping survivors"))

    for seed in range(CASES_PER_PROPERTY):
        rng = np.random.default_rng([5, seed])
        xy = rng.uniform(-100, 100, 4)
        wh = rng.uniform(1e-3, 100, 4)
        a = BoundingBox(xy[0], xy[1], xy[0] + wh[0], xy[1] + wh[1])
        b = BoundingBox(xy[2], xy[3], xy[2] + wh[2], xy[3] + wh[3])
        v = iou(a, b)
        if not (0 <= v <= 1 and v == iou(b, a) and iou(a, a) == 1.0):
            violations.append(("iou", seed, v))

    for seed in range(CASES_PER_PROPERTY):
        rng = np.random.default_rng([6, seed])
        c1, c2 = (int(c) for c in rng.integers(0, len(tax), 2))
        v = lin_similarity(tax, c1, c2)
        if not (0 <= v <= 1 and v == lin_similarity(tax, c2, c1)):
            violations.append(("lin", seed, v))
        if c1 in leaves and lin_similarity(tax, c1, c1) != 1.0:
            violations.append(("lin", seed, "self"))

    elapsed = time.perf_counter() - t0
    print(f"{4 * CASES_PER_PROPERTY} cases, {len(violations)} violations, {elapsed:.1f}s")
    assert violations == []
    assert elapsed < 120


# --------------------------------------------------------------------------
# 4. thread count never changes output bytes


@pytest.mark.criterion(4, "byte-identical regularize/sweep/tune output for 1, 2 and 8 threads")
def test_thread_determinism(tmp_path):
    t0 = time.perf_counter()
    spec = tmp_path / "spec.json"
    spec.write_text('{"count": 8, "rng_seed": 700}')
    assert main(["synth", str(spec), "--out", str(tmp_path / "suite")]) == 0
    scenes = str(tmp_path / "suite" / "scenes.json")
    grid = str(data.path("default_grid.json"))
    demo = str(data.path("demo_scene.detections.json"))

    outputs = {}
    for threads in (1, 2, 8):
        d = tmp_path / f"t{threads}"
        d.mkdir()
        t = ["--threads", str(threads)]
        assert main(["regularize", demo, *t, "--out", str(d / "reg.json"), "--trace", str(d / "trace.json")]) == 0
        assert main(["sweep", scenes, "--param", "w_a", "--values", "0.03,0.1,0.3", *t,
                     "--out", str(d / "sweep.csv")]) == 0
        assert main(["tune", grid, scenes, *t, "--out", str(d / "tune.json")]) == 0
        outputs[threads] = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
    assert outputs[1] == outputs[2] == outputs[8]
    assert time.perf_counter() - t0 < 60


# --------------------------------------------------------------------------
# 5. directional benchmark: MAPC beats both NMS-based baselines


@pytest.fixture(scope="module")
def benchmark():
    tax = fixture_taxonomy()
    bench = formats.read_json(data.path("benchmark.json"))
    spec = SceneSpec.from_dict(bench["scene_spec"], tax)
    train = generate_suite(spec, tax, bench["train"]["count"], bench["train"]["first_seed"])
    test = generate_suite(spec, tax, bench["test"]["count"], bench["test"]["first_seed"])
    return tax, bench, train, test


@pytest.mark.criterion(5, "tuned MAPC pooled F1 strictly above WC+AC-NMS and SAPC+AC-NMS on 100 scenes")
def test_directional_benchmark(benchmark):
    tax, bench, train, test = benchmark
    t0 = time.perf_counter()
    results = {}
    for method in ("wcacnms", "sapc+acnms", "mapc"):
        tuned = grid_search(ParamGrid(bench["grids"][method]), train, method, tax, threads=THREADS)
        report = evaluate_scenes(method, test, tax, RunConfig().with_knobs(tuned.best_params), threads=THREADS)
        results[method] = {"best_params": tuned.best_params, "train_f1": tuned.best_score, **report.as_dict()}
        print(f"{method:>11}: P {report.precision:.4f} R {report.recall:.4f} F1 {report.f1:.4f}")
    elapsed = time.perf_counter() - t0
    golden("benchmark_results.json", results)
    assert results["mapc"]["f1"] > results["wcacnms"]["f1"]
    assert results["mapc"]["f1"] > results["sapc+acnms"]["f1"]
    assert elapsed < 600


# --------------------------------------------------------------------------
# 6. scattered clutter defeats NMS but not MAPC


@pytest.mark.criterion(6, "clutter fixture: MAPC precision above WC+AC-NMS at equal or better recall")
def test_nms_ceiling_on_clutter():
    tax = fixture_taxonomy()
    scenes = formats.parse_scene_set(formats.read_json(data.path("clutter_scene.json")), tax)
    cfg = RunConfig()
    mapc = evaluate_scenes("mapc", scenes, tax, cfg)
    nms = evaluate_scenes("wcacnms", scenes, tax, cfg)
    print(f"mapc P {mapc.precision:.3f} R {mapc.recall:.3f}; wcacnms P {nms.precision:.3f} R {nms.recall:.3f}")
    assert mapc.precision > nms.precision
    assert mapc.recall >= nms.recall
    # the clutter boxes overlap nothing, so no NMS threshold can remove them
    loosest = evaluate_scenes("wcacnms", scenes, tax, cfg.with_knobs({"iou_within": 0.0, "iou_across": 0.0}))
    assert loosest.fp >= 4


# --------------------------------------------------------------------------
# 7. trace contract on the bundled 6-point fixture


@pytest.mark.criterion(7, "6-point trace: all-background start, final equals result, stable tail, golden")
def test_six_point_trace(tmp_path):
    out, trace = tmp_path / "result.json", tmp_path / "trace.json"
    six = str(data.path("six_point.detections.json"))
    assert main(["regularize", six, "--out", str(out), "--trace", str(trace)]) == 0
    result, doc = formats.read_json(out), formats.read_json(trace)
    snaps = doc["snapshots"]
    assert all(a is None for a in snaps[0]["assignment"])
    final = [m["exemplar_point_id"] for m in result["members"]]
    assert snaps[-1]["assignment"] == final
    window = InferenceConfig().convergence_window
    assert doc["converged"]
    assert len({tuple(s["exemplars"]) for s in snaps[-window:]}) == 1
    golden("six_point_trace.json", doc)
