"""Seeded synthetic detection scenes with a fine-grained detector noise model.

Randomness comes from xoshiro256** seeded through splitmix64 and only
integer arithmetic plus exact float scaling is used to draw numbers, so a
given seed yields byte-identical scenes on every platform.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .candidates import Detection
from .evaluation import GroundTruthObject
from .geometry import BoundingBox, iou
from .pipeline import Scene
from .taxonomy import Taxonomy

_MASK = (1 << 64) - 1


class SpecInvalid(ValueError):
    pass


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** generator."""

    def __init__(self, seed: int):
        sm = seed & _MASK
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Integer in the closed range [lo, hi]."""
        return lo + self.randbelow(hi - lo + 1)

    def choice(self, seq: Sequence):
        return seq[self.randbelow(len(seq))]

    def bernoulli(self, p: float) -> bool:
        return self.random() < p


@dataclass(frozen=True)
class ScoreModel:
    true_score: tuple[float, float] = (0.45, 0.95)
    sibling_confusion: float = 0.5
    sibling_score: tuple[float, float] = (0.4, 0.9)
    clutter_rate: float = 4.0
    clutter_score: tuple[float, float] = (0.4, 0.9)


@dataclass(frozen=True)
class SceneSpec:
    n_objects: tuple[int, int] = (2, 5)
    image_size: tuple[float, float] = (640.0, 480.0)
    leaf_class_pool: tuple[int, ...] | None = None
    proposals_per_object: tuple[int, int] = (3, 6)
    box_jitter: tuple[float, float] = (0.12, 0.15)
    object_size: tuple[float, float] = (0.12, 0.35)
    score_model: ScoreModel = field(default_factory=ScoreModel)
    rng_seed: int = 0

    def validate(self, taxonomy: Taxonomy):
        def rng_ok(r):
            return len(r) == 2 and r[0] <= r[1]

        for name in ("n_objects", "proposals_per_object", "object_size"):
            if not rng_ok(getattr(self, name)):
                raise SpecInvalid(f"{name} must be a non-empty [lo, hi] range")
        if self.n_objects[0] < 0 or self.proposals_per_object[0] < 1:
            raise SpecInvalid("counts must be non-negative and at least one proposal per object")
        if not (0 < self.object_size[0] and self.object_size[1] <= 1):
            raise SpecInvalid("object_size fractions must lie in (0, 1]")
        if self.image_size[0] <= 0 or self.image_size[1] <= 0:
            raise SpecInvalid("image_size must be positive")
        if any(j < 0 for j in self.box_jitter):
            raise SpecInvalid("box_jitter must be non-negative")
        sm = self.score_model
        for name in ("true_score", "sibling_score", "clutter_score"):
            r = getattr(sm, name)
            if not (rng_ok(r) and 0 <= r[0] and r[1] <= 1):
                raise SpecInvalid(f"score_model.{name} must be a range inside [0, 1]")
        if not 0 <= sm.sibling_confusion <= 1:
            raise SpecInvalid("sibling_confusion must be a probability")
        if sm.clutter_rate < 0:
            raise SpecInvalid("clutter_rate must be non-negative")
        pool = self.pool(taxonomy)
        if not pool and (self.n_objects[1] > 0 or sm.clutter_rate > 0):
            raise SpecInvalid("empty leaf class pool")

    def pool(self, taxonomy: Taxonomy) -> tuple[int, ...]:
        if self.leaf_class_pool is not None:
            return tuple(self.leaf_class_pool)
        return tuple(taxonomy.leaves())

    def to_dict(self, taxonomy: Taxonomy | None = None) -> dict:
        d = asdict(self)
        if self.leaf_class_pool is not None and taxonomy is not None:
            d["leaf_class_pool"] = [taxonomy.name_of(c) for c in self.leaf_class_pool]
        return d

    @classmethod
    def from_dict(cls, doc: Mapping, taxonomy: Taxonomy | None = None) -> "SceneSpec":
        d = dict(doc)
        d.pop("format_version", None)
        try:
            sm = ScoreModel(**{k: tuple(v) if isinstance(v, list) else v
                               for k, v in d.pop("score_model", {}).items()})
            pool = d.pop("leaf_class_pool", None)
            if pool is not None:
                pool = tuple(taxonomy.id_of(c) if isinstance(c, str) else int(c) for c in pool)
            d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
            return cls(score_model=sm, leaf_class_pool=pool, **d)
        except (TypeError, KeyError) as e:
            raise SpecInvalid(str(e)) from e


def _q(x: float, places: int) -> float:
    return round(x, places)


def _clip_box(cx, cy, w, h, W, H) -> BoundingBox:
    x0 = min(max(cx - w / 2, 0.0), W - 1.0)
    y0 = min(max(cy - h / 2, 0.0), H - 1.0)
    x1 = max(min(cx + w / 2, W), x0 + 1.0)
    y1 = max(min(cy + h / 2, H), y0 + 1.0)
    return BoundingBox(_q(x0, 2), _q(y0, 2), _q(x1, 2), _q(y1, 2))


def _random_box(rng: Xoshiro256, spec: SceneSpec) -> BoundingBox:
    W, H = spec.image_size
    w = rng.uniform(*spec.object_size) * W
    h = rng.uniform(*spec.object_size) * H
    cx = rng.uniform(w / 2, W - w / 2)
    cy = rng.uniform(h / 2, H - h / 2)
    return _clip_box(cx, cy, w, h, W, H)


def generate_scene(spec: SceneSpec, taxonomy: Taxonomy) -> Scene:
    """Plant ground-truth objects and emit noisy detections around them.

    Every object gets a handful of jittered proposals scoring its true class;
    with the sibling-confusion probability a proposal also scores one fixed
    taxonomy sibling of the true class (the detector's favourite confusion for
    that object), and clutter detections land on random boxes with random
    classes.
    """
    spec.validate(taxonomy)
    rng = Xoshiro256(spec.rng_seed)
    pool = spec.pool(taxonomy)
    sm = spec.score_model
    W, H = spec.image_size
    cj, sj = spec.box_jitter

    gt: list[GroundTruthObject] = []
    n_obj = rng.randint(*spec.n_objects)
    for _ in range(n_obj):
        box = _random_box(rng, spec)
        for _retry in range(20):
            if all(iou(box, g.box) <= 0.3 for g in gt):
                break
            box = _random_box(rng, spec)
        gt.append(GroundTruthObject(box, rng.choice(pool)))

    dets: list[Detection] = []
    for g in gt:
        sibs = taxonomy.siblings(g.class_id)
        confuser = rng.choice(sibs) if sibs else None
        b = g.box
        w, h = b.x_max - b.x_min, b.y_max - b.y_min
        cx, cy = (b.x_min + b.x_max) / 2, (b.y_min + b.y_max) / 2
        for _ in range(rng.randint(*spec.proposals_per_object)):
            pcx = cx + rng.uniform(-cj, cj) * w
            pcy = cy + rng.uniform(-cj, cj) * h
            pw = w * (1.0 + rng.uniform(-sj, sj))
            ph = h * (1.0 + rng.uniform(-sj, sj))
            pbox = _clip_box(pcx, pcy, pw, ph, W, H)
            scores = {g.class_id: _q(rng.uniform(*sm.true_score), 4)}
            if confuser is not None and rng.bernoulli(sm.sibling_confusion):
                scores[confuser] = _q(rng.uniform(*sm.sibling_score), 4)
            dets.append(Detection(pbox, scores))

    n_clutter = int(sm.clutter_rate)
    if rng.bernoulli(sm.clutter_rate - n_clutter):
        n_clutter += 1
    for _ in range(n_clutter):
        box = _random_box(rng, spec)
        dets.append(Detection(box, {rng.choice(pool): _q(rng.uniform(*sm.clutter_score), 4)}))

    return Scene(dets, gt, (W, H), f"seed{spec.rng_seed}")


def generate_suite(spec: SceneSpec, taxonomy: Taxonomy, count: int, first_seed: int) -> list[Scene]:
    """``count`` scenes drawn with seeds ``first_seed, first_seed + 1, ...``."""
    from dataclasses import replace

    return [generate_scene(replace(spec, rng_seed=first_seed + k), taxonomy) for k in range(count)]
