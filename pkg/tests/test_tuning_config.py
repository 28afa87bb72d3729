import pytest
from conftest import golden

from mapc import data, formats
from mapc.candidates import Detection
from mapc.config import KNOBS, ConfigError, RunConfig
from mapc.evaluation import GroundTruthObject, UnknownParameter
from mapc.geometry import BoundingBox
from mapc.pipeline import Scene, evaluate_scenes
from mapc.synthesis import SceneSpec, generate_suite
from mapc.tuning import GridTooLarge, ParamGrid, grid_search, score_report


@pytest.fixture(scope="module")
def noiseless(tax):
    """Two touching objects of unrelated classes, each detected once, exactly."""
    a, b = BoundingBox(0, 0, 10, 10), BoundingBox(6, 0, 16, 10)  # iou 0.25
    ca, cb = tax.id_of("beagle"), tax.id_of("desk")
    dets = [Detection(a, {ca: 0.9}), Detection(b, {cb: 0.8})]
    return [Scene(dets, [GroundTruthObject(a, ca), GroundTruthObject(b, cb)], (20, 20), "pair")]


def test_one_point_grid(noiseless, tax):
    res = grid_search(ParamGrid({"iou_across": [0.5]}), noiseless, "wcacnms", tax)
    assert res.best_params == {"iou_across": 0.5}
    assert res.best_score == evaluate_scenes("wcacnms", noiseless, tax, RunConfig().with_knobs(res.best_params)).f1
    assert len(res.table) == 1


def test_dominating_config_wins(noiseless, tax):
    res = grid_search(ParamGrid({"iou_across": [0.0, 0.5]}), noiseless, "wcacnms", tax)
    assert res.best_params == {"iou_across": 0.5}
    assert res.best_score == 1.0
    scores = {row[0]["iou_across"]: row[2] for row in res.table}
    assert scores[0.0] < 1.0


def test_ties_go_to_smaller_vector(noiseless, tax):
    res = grid_search(ParamGrid({"iou_across": [0.9, 0.5, 0.7]}), noiseless, "wcacnms", tax)
    assert res.best_params == {"iou_across": 0.5}


def test_grid_validation(noiseless, tax):
    with pytest.raises(UnknownParameter):
        ParamGrid({"gamma": [1]})
    with pytest.raises(ValueError):
        ParamGrid({"w_a": []})
    with pytest.raises(GridTooLarge):
        grid_search(ParamGrid({"w_a": list(range(5)), "w_d": list(range(5))}), noiseless, "mapc", tax, cap=20)


def test_precision_objective_respects_recall_floor():
    from mapc.evaluation import EvalReport

    hi_p = EvalReport(1.0, 0.2, 0.33, 0, 0, 1, 0, 4)
    lo_p = EvalReport(0.6, 0.8, 0.69, 0, 0, 4, 3, 1)
    assert score_report(hi_p, "precision", 0.5) < score_report(lo_p, "precision", 0.5)
    assert score_report(hi_p, "precision", 0.0) > score_report(lo_p, "precision", 0.0)
    with pytest.raises(ValueError):
        score_report(hi_p, "auc")


def test_threads_do_not_change_result(tax):
    scenes = generate_suite(SceneSpec(), tax, 4, 500)
    grid = ParamGrid({"w_a": [0.03, 0.1], "theta_bg": [0.2, 0.3]})
    one = grid_search(grid, scenes, "mapc", tax, threads=1)
    many = grid_search(grid, scenes, "mapc", tax, threads=4)
    assert one.best_params == many.best_params
    assert [(p, r, s) for p, r, s in one.table] == [(p, r, s) for p, r, s in many.table]


def test_default_grid_golden(tax):
    doc = formats.read_json(data.path("default_grid.json"))
    bench = formats.read_json(data.path("benchmark.json"))
    spec = SceneSpec.from_dict(bench["scene_spec"], tax)
    scenes = generate_suite(spec, tax, bench["train"]["count"], bench["train"]["first_seed"])
    res = grid_search(ParamGrid(doc["axes"]), scenes, "mapc", tax, objective=doc["objective"], threads=4)
    golden("default_grid_best.json", {"best_params": res.best_params, "best_score": res.best_score})


# config


def test_knobs_round_trip():
    cfg = RunConfig().with_knobs({"lambda": 0.7, "w_a": 0.2, "iou_across": 0.3, "damping": 0.5})
    assert cfg.knob("lambda") == 0.7 and cfg.weights.w_a == 0.2
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_every_knob_is_settable():
    base = RunConfig()
    for name in KNOBS:
        value = base.knob(name)
        assert base.with_knobs({name: value}) == base


def test_bad_knob_values():
    with pytest.raises(ConfigError):
        RunConfig().with_knobs({"lambda": 2.0})
    with pytest.raises(UnknownParameter):
        RunConfig().with_knobs({"gamma": 1})


@pytest.mark.parametrize("doc", [
    {"colour": {}},
    {"weights": {"w_z": 1}},
    {"similarity": {"theta_bg": -1}},
    [],
])
def test_bad_config_documents(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc)


def test_relabel_targets_by_name(tax):
    cfg = RunConfig.from_dict({"eval": {"parent_relabel_targets": ["dog", "cat"]}}, tax)
    assert cfg.evaluation.parent_relabel_targets == frozenset({tax.id_of("dog"), tax.id_of("cat")})
