"""EvalReport: accuracy and relevance diagnostics of one model on one dataset."""
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging

import numpy as np

from ..misc.exceptions import ContractError
from ..streams import MODALITIES

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-6

@dataclass
class SampleResult:
    """What evaluation learned from one sample."""
    sample_id: int
    scenario_id: str
    predicted: list[int]
    correct: bool
    modality_mass: tuple | None = None
    alpha_entropy: float | None = None
    relevant_modality: frozenset = frozenset()

    @property
    def top_modality(self) -> str | None:
        """The modality holding the most relevance mass; None without α or when every block was masked."""
        if self.modality_mass is None or max(self.modality_mass) <= 0:
            return None
        return MODALITIES[int(np.argmax(self.modality_mass))]

    @property
    def hit(self) -> bool | None:
        top = self.top_modality
        return None if top is None else top in self.relevant_modality

@dataclass
class EvalReport:
    dataset_id: str
    checkpoint_id: str
    n: int
    accuracy: float
    relevance_hit_rate: float | None = None
    mean_modality_mass: list | None = None
    mean_alpha_entropy: float | None = None
    mode: str = "gated"
    dropped: list = field(default_factory=list)
    renormalize: bool = True
    per_scenario: dict = field(default_factory=dict)
    robustness: "EvalReport | None" = None

    def __post_init__(self):
        for name in ("accuracy", "relevance_hit_rate"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} {value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "checkpoint_id": self.checkpoint_id,
            "n": self.n,
            "accuracy": self.accuracy,
            "relevance_hit_rate": self.relevance_hit_rate,
            "mean_modality_mass": self.mean_modality_mass,
            "mean_alpha_entropy": self.mean_alpha_entropy,
            "mode": self.mode,
            "dropped": list(self.dropped),
            "renormalize": self.renormalize,
            "per_scenario": self.per_scenario,
            "robustness": None if self.robustness is None else self.robustness.to_dict(),
        }

    @classmethod
    def from_dict(cls, data : dict) -> "EvalReport":
        data = dict(data)
        robustness = data.pop("robustness", None)
        return cls(**data, robustness=None if robustness is None else cls.from_dict(robustness))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def save(self, path : Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf8")
        logger.info(f"Wrote evaluation report to {path}")

def _rate(values) -> float | None:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None

def _summary(results : list[SampleResult]) -> dict:
    masses = [r.modality_mass for r in results if r.modality_mass is not None]
    entropies = [r.alpha_entropy for r in results if r.alpha_entropy is not None]
    return {
        "n": len(results),
        "accuracy": float(np.mean([r.correct for r in results])),
        "relevance_hit_rate": _rate(r.hit for r in results),
        "mean_modality_mass": [float(x) for x in np.mean(masses, axis=0)] if masses else None,
        "mean_alpha_entropy": float(np.mean(entropies)) if entropies else None,
    }

def summarize(results : list[SampleResult], dataset_id : str, checkpoint_id : str, mode : str = "gated", dropped=(), renormalize : bool = True) -> EvalReport:
    """Aggregate per-sample results into a report with a per-scenario breakdown."""
    if not results:
        raise ContractError("cannot summarize an empty evaluation")
    if renormalize:
        for r in results:
            if r.modality_mass is not None and max(r.modality_mass) > 0 and abs(sum(r.modality_mass) - 1.0) > MASS_TOLERANCE:
                raise ContractError(f"sample {r.sample_id}: modality masses sum to {sum(r.modality_mass)}")
    per_scenario = {}
    for scenario in sorted({r.scenario_id for r in results}):
        per_scenario[scenario] = _summary([r for r in results if r.scenario_id == scenario])
    overall = _summary(results)
    return EvalReport(
        dataset_id=dataset_id,
        checkpoint_id=checkpoint_id,
        mode=mode,
        dropped=list(dropped),
        renormalize=renormalize,
        per_scenario=per_scenario,
        **overall,
    )
