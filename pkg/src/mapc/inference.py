"""Affinity propagation by max-sum message passing.

The factor graph has one binary variable ``c[i, j]`` per (point, exemplar)
pair plus a background variable per point.  Factors:

* ``S``   unary: ``w_a * s(i, i)`` on ``c[i, i]``, ``w_b * s(i, j)`` on ``c[i, j]``,
  ``w_b * s_bg`` on the background variable;
* ``I~_i``  exactly one of row ``i`` (background included) is on;
* ``E_j``   if ``c[j, j]`` is off, nothing in column ``j`` may be on;
* ``R_jl``  pairwise on ``(c[j, j], c[l, l])``: ``w_d * r(j, l)`` if both on;
* ``E~_k``  at most one ``c[j, j]`` on among the points of box ``k``.

All messages are kept as log-odds differences ``m(1) - m(0)``.  The row and
column factors give the classic responsibility/availability updates; the
repellence and box factors only touch the diagonal and are folded into the
responsibility of ``c[j, j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .candidates import CandidateSet
from .similarity import SimilarityModel, SimilarityParams, iou_only_model

BACKGROUND = -1


class DimensionMismatch(ValueError):
    pass


class TraceDisabled(RuntimeError):
    pass


@dataclass(frozen=True)
class ObjectiveWeights:
    """Weights of the regularisation objective.

    ``w_c`` and ``w_e`` multiply hard constraints whose terms are 0 or -inf,
    so any positive value behaves the same; both constraints are always
    enforced.  ``w_f == 0`` switches the one-exemplar-per-box constraint off.
    ``background_affinity`` is the similarity a point earns by joining the
    background cluster (scaled by ``w_b``).
    """

    w_a: float = 0.1
    w_b: float = 1.0
    w_c: float = 1.0
    w_d: float = 0.1
    w_e: float = 1.0
    w_f: float = 1.0
    background_affinity: float = 0.0

    def __post_init__(self):
        for name in ("w_a", "w_b", "w_c", "w_d", "w_e", "w_f"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite non-negative number, got {v}")
        if not math.isfinite(self.background_affinity):
            raise ValueError("background_affinity must be finite")

    @property
    def box_constraint(self) -> bool:
        return self.w_f > 0

    def scaled(self, k: float) -> "ObjectiveWeights":
        return ObjectiveWeights(
            self.w_a * k, self.w_b * k, self.w_c * k, self.w_d * k,
            self.w_e * k, self.w_f * k, self.background_affinity,
        )


@dataclass(frozen=True)
class InferenceConfig:
    damping: float = 0.7
    max_iterations: int = 200
    convergence_window: int = 5
    min_iterations: int = 50
    trace_enabled: bool = False

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError(f"damping must lie in [0, 1), got {self.damping}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if self.min_iterations < 0:
            raise ValueError("min_iterations must be >= 0")


@dataclass
class RegularizedResult:
    selected: list[tuple[int, int, float]]
    assignment: np.ndarray
    objective_value: float
    iterations_run: int
    converged: bool
    trace: list[np.ndarray] | None = None
    exemplar_ids: list[int] = field(default_factory=list)

    @classmethod
    def empty(cls, trace_enabled: bool = False) -> "RegularizedResult":
        a = np.zeros(0, dtype=int)
        return cls([], a, 0.0, 0, True, [a.copy(), a.copy()] if trace_enabled else None, [])

    def cluster_of(self) -> dict[int, int]:
        """Map point id -> index of its exemplar in ``selected``."""
        index = {j: k for k, j in enumerate(self.exemplar_ids)}
        return {i: index[int(j)] for i, j in enumerate(self.assignment) if j != BACKGROUND}


def _exemplar_set(assign: np.ndarray) -> frozenset:
    return frozenset(int(i) for i in np.flatnonzero(assign == np.arange(len(assign))))


def check_assignment(assign: np.ndarray, box_ids: Sequence[int] | None) -> str | None:
    """Return a description of the first violated hard constraint, or None."""
    n = len(assign)
    for i, j in enumerate(assign):
        j = int(j)
        if j != BACKGROUND and not 0 <= j < n:
            return f"point {i} assigned to unknown exemplar {j}"
        if j != BACKGROUND and j != i and int(assign[j]) != j:
            return f"point {i} joins {j}, which is not an exemplar"
    if box_ids is not None:
        seen: dict[int, int] = {}
        for j in _exemplar_set(assign):
            b = box_ids[j]
            if b in seen:
                return f"box {b} has two exemplars ({seen[b]}, {j})"
            seen[b] = j
    return None


def objective_value(
    assign: Sequence[int],
    m: SimilarityModel,
    w: ObjectiveWeights,
    box_ids: Sequence[int] | None = None,
) -> float:
    """Weighted objective of a hard assignment; ``-inf`` if infeasible.

    ``box_ids`` is only consulted when the box constraint is active.
    """
    assign = np.asarray(assign, dtype=int)
    if assign.shape != (m.n,):
        raise DimensionMismatch(f"assignment of length {assign.shape} for model of size {m.n}")
    if w.box_constraint and box_ids is not None and len(box_ids) != m.n:
        raise DimensionMismatch("box_ids length differs from model size")
    if check_assignment(assign, box_ids if w.box_constraint else None) is not None:
        return -math.inf

    total_self = 0.0
    total_pair = 0.0
    exemplars = []
    for i, j in enumerate(assign):
        j = int(j)
        if j == i:
            total_self += m.self_sim[i]
            exemplars.append(i)
        elif j == BACKGROUND:
            total_pair += w.background_affinity
        else:
            total_pair += m.pair_sim[i, j]
    total_rep = 0.0
    for a in range(len(exemplars)):
        for b in range(a + 1, len(exemplars)):
            total_rep += m.repellence[exemplars[a], exemplars[b]]
    return w.w_a * total_self + w.w_b * total_pair + w.w_d * total_rep


def _row_exclusive_max(beta: np.ndarray, extra: float | None) -> np.ndarray:
    """``out[i, j] = max over q != j of beta[i, q]`` (with an optional extra column)."""
    n = beta.shape[0]
    cols = beta if extra is None else np.hstack([beta, np.full((n, 1), extra)])
    if cols.shape[1] == 1:
        return np.full((n, 1), -np.inf)[:, :n]
    idx = np.argmax(cols, axis=1)
    rows = np.arange(n)
    first = cols[rows, idx]
    tmp = cols.copy()
    tmp[rows, idx] = -np.inf
    second = tmp.max(axis=1)
    out = np.repeat(first[:, None], n, axis=1)
    hit = idx < n
    out[rows[hit], idx[hit]] = second[hit]
    return out


def _availabilities(rho: np.ndarray) -> np.ndarray:
    rp = np.maximum(rho, 0.0)
    diag = np.diag(rho).copy()
    np.fill_diagonal(rp, diag)
    col = rp.sum(axis=0)
    a = col[None, :] - rp
    self_a = np.diag(a).copy()
    a = np.minimum(a, 0.0)
    np.fill_diagonal(a, self_a)
    return a


class _Engine:
    """Message state for one run over one similarity model."""

    def __init__(self, m: SimilarityModel, w: ObjectiveWeights, box_ids, damping: float,
                 background: bool = True, repel: bool = True):
        n = m.n
        self.n = n
        self.m = m
        self.w = w
        self.damping = damping
        self.background = background
        s = w.w_b * m.pair_sim.astype(float, copy=True)
        np.fill_diagonal(s, w.w_a * m.self_sim)
        self.S = s
        self.bg = w.w_b * w.background_affinity if background else None
        self.repel = repel and w.w_d > 0 and n > 1
        self.WR = w.w_d * m.repellence if self.repel else None
        self.box_ids = None if box_ids is None else np.asarray(box_ids)
        self.use_box = box_ids is not None and w.box_constraint
        if self.use_box:
            same = self.box_ids[:, None] == self.box_ids[None, :]
            np.fill_diagonal(same, False)
            self.same_box = same
            self.use_box = bool(same.any())

        self.rho = np.zeros((n, n))
        self.alpha = np.zeros((n, n))
        self.rep_msg = np.zeros((n, n))
        self.box_msg = np.zeros(n)

    def extras(self) -> np.ndarray:
        return self.rep_msg.sum(axis=1) + self.box_msg

    def step(self):
        d = self.damping
        n = self.n
        diag = np.arange(n)
        x = self.extras()

        beta = self.S + self.alpha
        beta[diag, diag] += x
        excl = _row_exclusive_max(beta, self.bg)
        rho = self.S - excl
        rho[diag, diag] += x
        self.rho = d * self.rho + (1 - d) * rho

        self.alpha = d * self.alpha + (1 - d) * _availabilities(self.rho)

        belief = self.belief()
        if self.repel:
            mu = belief[:, None] - self.rep_msg  # c_jj -> R_jl
            mu_t = mu.T
            rep = np.maximum(self.WR + mu_t, 0.0) - np.maximum(mu_t, 0.0)
            np.fill_diagonal(rep, 0.0)
            self.rep_msg = d * self.rep_msg + (1 - d) * rep
        if self.use_box:
            nu = belief - self.box_msg  # c_jj -> box factor
            others = np.where(self.same_box, nu[None, :], -np.inf).max(axis=1)
            box = -np.maximum(others, 0.0)
            self.box_msg = d * self.box_msg + (1 - d) * box

    def belief(self) -> np.ndarray:
        return np.diag(self.rho) + np.diag(self.alpha)

    def decode(self) -> np.ndarray:
        return decode_assignment(self.belief(), self.S, self.bg,
                                 self.box_ids if self.use_box else None)


def decode_assignment(belief: np.ndarray, S: np.ndarray, bg: float | None,
                      box_ids: np.ndarray | None) -> np.ndarray:
    """Turn exemplar beliefs into a feasible assignment.

    Points with positive belief become exemplars; a box keeps only its
    strongest exemplar (ties to the lower id).  Every other point joins the
    exemplar it is most similar to, or the background when that earns more.
    Without a background option at least one exemplar is forced.
    """
    n = len(belief)
    ex = belief > 0
    if box_ids is not None and ex.any():
        for b in np.unique(box_ids[ex]):
            members = np.flatnonzero(ex & (box_ids == b))
            if len(members) > 1:
                keep = members[np.argmax(belief[members])]
                ex[members] = False
                ex[keep] = True
    if bg is None and not ex.any():
        ex[int(np.argmax(belief))] = True

    assign = np.full(n, BACKGROUND, dtype=int)
    ex_ids = np.flatnonzero(ex)
    assign[ex_ids] = ex_ids
    if len(ex_ids):
        others = np.flatnonzero(~ex)
        sub = S[np.ix_(others, ex_ids)]
        best = np.argmax(sub, axis=1)
        gain = sub[np.arange(len(others)), best]
        join = np.ones(len(others), dtype=bool) if bg is None else gain > bg
        assign[others[join]] = ex_ids[best[join]]
    return assign


def _run(engine: _Engine, cfg: InferenceConfig):
    n = engine.n
    trace = [np.full(n, BACKGROUND, dtype=int)] if cfg.trace_enabled else None
    history: list[frozenset] = []
    assign = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        engine.step()
        assign = engine.decode()
        if trace is not None:
            trace.append(assign.copy())
        history.append(_exemplar_set(assign))
        w = cfg.convergence_window
        if it >= max(cfg.min_iterations, w) and len(set(history[-w:])) == 1:
            converged = True
            break
    return assign, it, converged, trace


def _result(assign, m, w, box_ids, scores_points, it, converged, trace):
    ex_ids = sorted(_exemplar_set(assign))
    selected = [scores_points[j] for j in ex_ids]
    value = objective_value(assign, m, w, box_ids)
    return RegularizedResult(selected, assign, value, it, converged, trace, ex_ids)


def apc_cluster(m: SimilarityModel, cfg: InferenceConfig = InferenceConfig()) -> RegularizedResult:
    """Classic affinity propagation: no background, repellence or box factor.

    ``selected`` holds ``(point_id, point_id, self_sim)`` triples since the
    model carries no detections.
    """
    if m.n == 0:
        return RegularizedResult.empty(cfg.trace_enabled)
    w = ObjectiveWeights(w_d=0.0, w_f=0.0)
    if m.n == 1:
        a = np.zeros(1, dtype=int)
        trace = [np.full(1, BACKGROUND), a.copy()] if cfg.trace_enabled else None
        return _result(a, m, w, None, [(0, 0, float(m.self_sim[0]))], 1, True, trace)
    engine = _Engine(m, w, None, cfg.damping, background=False, repel=False)
    assign, it, converged, trace = _run(engine, cfg)
    pts = [(j, j, float(m.self_sim[j])) for j in range(m.n)]
    return _result(assign, m, w, None, pts, it, converged, trace)


def mapc_cluster(
    cands: CandidateSet,
    m: SimilarityModel,
    w: ObjectiveWeights = ObjectiveWeights(),
    cfg: InferenceConfig = InferenceConfig(),
) -> RegularizedResult:
    """Multi-class affinity propagation over box-class candidate points."""
    if len(cands) == 0:
        return RegularizedResult.empty(cfg.trace_enabled)
    if m.n != len(cands):
        raise DimensionMismatch("similarity model does not match candidate set")
    box_ids = cands.box_ids
    engine = _Engine(m, w, box_ids, cfg.damping)
    assign, it, converged, trace = _run(engine, cfg)
    pts = [(p.box_id, p.class_id, p.score) for p in cands.points]
    return _result(assign, m, w, box_ids, pts, it, converged, trace)


def sapc_cluster(
    cands: CandidateSet,
    params: SimilarityParams,
    w: ObjectiveWeights = ObjectiveWeights(),
    cfg: InferenceConfig = InferenceConfig(),
) -> RegularizedResult:
    """Single-class affinity propagation run independently for every class.

    Per class the similarity is the IoU alone and the box constraint is
    vacuous, so points of different classes never suppress each other.
    """
    if len(cands) == 0:
        return RegularizedResult.empty(cfg.trace_enabled)
    w_cls = ObjectiveWeights(w.w_a, w.w_b, w.w_c, w.w_d, w.w_e, 0.0, w.background_affinity)
    n = len(cands)
    assign = np.full(n, BACKGROUND, dtype=int)
    value = 0.0
    iterations = 0
    converged = True
    traces = []
    for cls in sorted(set(cands.class_ids)):
        ids = [p.point_id for p in cands.points if p.class_id == cls]
        sub = cands.subset(ids)
        m = iou_only_model(sub, params.theta_bg)
        engine = _Engine(m, w_cls, None, cfg.damping)
        sub_assign, it, conv, trace = _run(engine, cfg)
        ids_arr = np.asarray(ids)
        mapped = np.where(sub_assign == BACKGROUND, BACKGROUND, ids_arr[np.maximum(sub_assign, 0)])
        assign[ids_arr] = mapped
        value += objective_value(sub_assign, m, w_cls)
        iterations = max(iterations, it)
        converged = converged and conv
        if trace is not None:
            traces.append((ids_arr, trace))

    merged = None
    if cfg.trace_enabled:
        merged = []
        for t in range(iterations + 1):
            snap = np.full(n, BACKGROUND, dtype=int)
            for ids_arr, trace in traces:
                s = trace[min(t, len(trace) - 1)]
                snap[ids_arr] = np.where(s == BACKGROUND, BACKGROUND, ids_arr[np.maximum(s, 0)])
            merged.append(snap)

    ex_ids = sorted(_exemplar_set(assign))
    pts = cands.points
    selected = [(pts[j].box_id, pts[j].class_id, pts[j].score) for j in ex_ids]
    return RegularizedResult(selected, assign, value, iterations, converged, merged, ex_ids)


def iteration_trace(result: RegularizedResult) -> list[np.ndarray]:
    if result.trace is None:
        raise TraceDisabled("run was not traced; set InferenceConfig(trace_enabled=True)")
    return result.trace
