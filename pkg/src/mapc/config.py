"""Run configuration shared by the pipeline, sweeps, tuning and the CLI."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping

from .baselines import NmsParams
from .evaluation import EvalConfig, UnknownParameter
from .inference import InferenceConfig, ObjectiveWeights
from .similarity import SimilarityParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateParams:
    top_k: int = 5
    top_n: int | None = 100
    # NMS and SAPC label every box with its best class only
    single_label_baselines: bool = True

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.top_n is not None and self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    similarity: SimilarityParams = field(default_factory=SimilarityParams)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    nms: NmsParams = field(default_factory=NmsParams)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    candidates: CandidateParams = field(default_factory=CandidateParams)

    def with_knobs(self, knobs: Mapping[str, Any]) -> "RunConfig":
        cfg = self
        for name, value in knobs.items():
            if name not in KNOBS:
                raise UnknownParameter(name)
            section, attr = KNOBS[name]
            try:
                cfg = replace(cfg, **{section: replace(getattr(cfg, section), **{attr: value})})
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{name}={value!r}: {e}") from e
        return cfg

    def knob(self, name: str):
        section, attr = KNOBS[name]
        return getattr(getattr(self, section), attr)

    def to_dict(self, taxonomy=None) -> dict:
        d = {
            "similarity": {"lambda": self.similarity.lam, "theta_bg": self.similarity.theta_bg},
            "weights": asdict(self.weights),
            "inference": asdict(self.inference),
            "nms": asdict(self.nms),
            "candidates": asdict(self.candidates),
            "eval": {"iou_threshold": self.evaluation.iou_threshold},
        }
        targets = self.evaluation.parent_relabel_targets
        if targets:
            d["eval"]["parent_relabel_targets"] = sorted(
                taxonomy.name_of(t) if taxonomy is not None else t for t in targets
            )
        return d

    @classmethod
    def from_dict(cls, doc: Mapping, taxonomy=None) -> "RunConfig":
        """Build a config from its document form, validating every bound.

        Unknown sections or keys are rejected so typos do not pass silently.
        """
        if not isinstance(doc, Mapping):
            raise ConfigError("config document must be an object")
        known = {"format_version", "similarity", "weights", "inference", "nms", "eval", "candidates"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
        try:
            sim = dict(doc.get("similarity", {}))
            if "lambda" in sim:
                sim["lam"] = sim.pop("lambda")
            ev = dict(doc.get("eval", {}))
            targets = ev.pop("parent_relabel_targets", None)
            if targets:
                if taxonomy is None:
                    raise ConfigError("parent_relabel_targets needs a taxonomy")
                targets = frozenset(
                    taxonomy.id_of(t) if isinstance(t, str) else int(t) for t in targets
                )
            return cls(
                similarity=SimilarityParams(**sim),
                weights=ObjectiveWeights(**doc.get("weights", {})),
                inference=InferenceConfig(**doc.get("inference", {})),
                nms=NmsParams(**doc.get("nms", {})),
                evaluation=EvalConfig(parent_relabel_targets=targets or None, **ev),
                candidates=CandidateParams(**doc.get("candidates", {})),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(str(e)) from e


# tunable knob name -> (RunConfig section, attribute)
KNOBS: dict[str, tuple[str, str]] = {
    "lambda": ("similarity", "lam"),
    "theta_bg": ("similarity", "theta_bg"),
    "w_a": ("weights", "w_a"),
    "w_b": ("weights", "w_b"),
    "w_c": ("weights", "w_c"),
    "w_d": ("weights", "w_d"),
    "w_e": ("weights", "w_e"),
    "w_f": ("weights", "w_f"),
    "background_affinity": ("weights", "background_affinity"),
    "damping": ("inference", "damping"),
    "iou_within": ("nms", "iou_within"),
    "iou_across": ("nms", "iou_across"),
    "top_k": ("candidates", "top_k"),
}
