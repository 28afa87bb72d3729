import functools
import json
import os
from pathlib import Path

import numpy as np
import pytest

from mapc import data
from mapc.candidates import CandidatePoint, CandidateSet, Detection
from mapc.geometry import BoundingBox
from mapc.similarity import SimilarityModel
from mapc.taxonomy import Taxonomy, load_taxonomy

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("MAPC_UPDATE_GOLDEN") == "1"


def golden(name: str, actual):
    """Compare ``actual`` (JSON-able or str) with a pinned file.

    Run with MAPC_UPDATE_GOLDEN=1 to rewrite the file instead.
    """
    path = GOLDEN / name
    text = actual if isinstance(actual, str) else json.dumps(actual, indent=1, sort_keys=True) + "\n"
    if UPDATE or not path.exists():
        if not UPDATE:
            pytest.fail(f"golden file {name} missing; rerun with MAPC_UPDATE_GOLDEN=1")
        path.write_text(text)
        return
    assert text == path.read_text(), f"output differs from golden file {name}"


def star_records(with_q: bool = False):
    # root -> leaf1, leaf2, leaf3 (freqs 1, 1, 2); optionally q between root and leaf1/leaf2
    recs = [{"id": 0, "name": "root", "frequency": 0}]
    if with_q:
        recs.append({"id": 4, "name": "q", "parent_id": 0, "frequency": 0})
    mid = 4 if with_q else 0
    recs += [
        {"id": 1, "name": "leaf1", "parent_id": mid, "frequency": 1},
        {"id": 2, "name": "leaf2", "parent_id": mid, "frequency": 1},
        {"id": 3, "name": "leaf3", "parent_id": 0, "frequency": 2},
    ]
    return recs


@pytest.fixture(scope="session")
def star():
    return Taxonomy.from_nodes(star_records())


@pytest.fixture(scope="session")
def star_q():
    return Taxonomy.from_nodes(star_records(with_q=True))


@functools.lru_cache(maxsize=None)
def fixture_taxonomy() -> Taxonomy:
    return load_taxonomy(str(data.path("fixture_taxonomy.json")))


@pytest.fixture(scope="session")
def tax():
    return fixture_taxonomy()


def three_point_set():
    """Boxes with IoU(0, 1) = 1/3, box 2 far away; classes leaf1, leaf2, leaf3."""
    boxes = [BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 15, 10), BoundingBox(20, 20, 30, 30)]
    pts = [CandidatePoint(0, 0, 1, 0.9), CandidatePoint(1, 1, 2, 0.8), CandidatePoint(2, 2, 3, 0.55)]
    return CandidateSet(pts, boxes, 3, 0.3)


@pytest.fixture
def three_points():
    return three_point_set()


def random_model(rng: np.random.Generator, n: int) -> SimilarityModel:
    """Symmetric similarities in [0, 1] and self-similarities of the scored form."""
    a = rng.uniform(0, 1, (n, n))
    pair = (a + a.T) / 2
    np.fill_diagonal(pair, 1.0)
    scores = rng.uniform(0.35, 1.0, n)
    return SimilarityModel(pair, -1.0 / (scores - 0.3), -(pair + 1.0))


def random_detections(rng: np.random.Generator, taxonomy, n_boxes: int, max_labels: int = 2,
                      extent: float = 100.0) -> list[Detection]:
    leaves = taxonomy.leaves()
    out = []
    for _ in range(n_boxes):
        x0, y0 = rng.uniform(0, extent, 2)
        w, h = rng.uniform(5, extent / 2, 2)
        k = int(rng.integers(1, max_labels + 1))
        classes = rng.choice(leaves, size=k, replace=False)
        scores = {int(c): float(np.round(rng.uniform(0.35, 1.0), 4)) for c in classes}
        out.append(Detection(BoundingBox(float(x0), float(y0), float(x0 + w), float(y0 + h)), scores))
    return out


# acceptance reporting: one line per criterion at the end of the run

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": 0, "failed": 0, "notes": []})
    if rep.passed:
        entry["passed"] += 1
    else:
        entry["failed"] += 1
        entry["notes"].append(item.callspec.id if hasattr(item, "callspec") else item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["failed"] == 0 else "FAIL"
        detail = f"{e['passed']}/{e['passed'] + e['failed']} checks"
        if e["notes"]:
            detail += "; failing: " + ", ".join(e["notes"])
        tr.write_line(f"[{status}] criterion {number}: {e['title']} ({detail})")
