"""
Controlled comparisons: every run of a grid starts from one shared stage-I checkpoint and
one master seed, differs from the base config only by its overrides, and is scored by the
same evaluation.
"""
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging

import pandas as pd

from ..base.config import RunConfig
from ..misc.exceptions import ConfigError
from ..perturb import PerturbationSpec
from ..pipeline import Checkpoint, StageConfig, run_pipeline, run_stage, stage_name
from ..quart import MODES
from ..streams import MODALITIES, MODALITY_LETTERS
from ..streams.dataset import Dataset
from .evaluate import evaluate
from .report import EvalReport

logger = logging.getLogger(__name__)

@dataclass(frozen=True)
class AblationRun:
    """One row of a grid: config overrides, the stages trained after stage I and the evaluation mode."""
    name: str
    overrides: dict = field(default_factory=dict)
    stages: tuple = ("II", "III")
    eval_mode: str = "gated"

    def __post_init__(self):
        unknown = set(self.overrides) - set(RunConfig.keys())
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config key in ablation grid")
        if self.eval_mode not in MODES:
            raise ConfigError("eval_mode", f"must be one of {', '.join(MODES)}")
        stages = tuple(stage_name(s) for s in self.stages)
        if not stages or "I" in stages:
            raise ConfigError("stages", "ablation runs train stage II and/or III on top of the shared stage I")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def from_dict(cls, data : dict) -> "AblationRun":
        data = dict(data)
        name = data.pop("name", None) or ",".join(f"{k}={v}" for k, v in sorted(data.items()) if k not in ("stages", "eval_mode"))
        stages = tuple(data.pop("stages", ("II", "III")))
        eval_mode = data.pop("eval_mode", "gated")
        return cls(name=name, overrides=data, stages=stages, eval_mode=eval_mode)

GRIDS = {
    "lambda": [AblationRun(f"lambda={lam}", {"lambda_reg": lam}) for lam in (1.0, 0.1, 0.01, 0.001)],
    "conditioning": [
        AblationRun("on_Z", {"loss_conditioning": "on_Z"}, eval_mode="raw"),
        AblationRun("on_C", {"loss_conditioning": "on_C"}),
    ],
    "context-mode": [
        AblationRun("gated", {"loss_conditioning": "on_C"}, stages=("II",)),
        AblationRun("raw", {"loss_conditioning": "on_Z"}, stages=("II",), eval_mode="raw"),
    ],
    "lora-rank": [AblationRun(f"lora_rank={r}", {"lora_rank": r}, stages=("II",)) for r in (1, 2, 4, 8, 16)],
}

def load_grid(grid : str) -> list[AblationRun]:
    """A preset name, or a JSON file holding a list of override objects."""
    if grid in GRIDS:
        return list(GRIDS[grid])
    path = Path(grid)
    if not path.exists():
        raise ConfigError("grid", f"{grid!r} is neither a preset ({', '.join(GRIDS)}) nor an existing file")
    try:
        deltas = json.loads(path.read_text(encoding="utf8"))
    except json.JSONDecodeError as e:
        raise ConfigError("grid", f"invalid JSON in {path}: {e}") from e
    if not isinstance(deltas, list) or not all(isinstance(d, dict) for d in deltas):
        raise ConfigError("grid", "a grid file holds a JSON list of objects")
    return [AblationRun.from_dict(d) for d in deltas]

def shared_stage1(config : RunConfig, dataset : Dataset, context : dict | None = None) -> Checkpoint:
    return run_stage(StageConfig.from_config(config, "I"), dataset, None, config, context=context)

def ablation_matrix(config : RunConfig, runs : list[AblationRun], train : Dataset, eval_data : Dataset, stage1 : Checkpoint | None = None,
                    perturb : PerturbationSpec | None = None, threads : int = 1) -> tuple[pd.DataFrame, dict[str, EvalReport]]:
    """Train and evaluate every run; one table row and one report per run, in grid order."""
    if not runs:
        raise ConfigError("grid", "an ablation grid needs at least one run")
    names = [run.name for run in runs]
    if len(set(names)) != len(names):
        raise ConfigError("grid", "run names must be unique")
    stage1 = stage1 or shared_stage1(config, train)

    rows, reports = [], {}
    for run in runs:
        run_config = RunConfig.from_dict({**config.to_dict(), **run.overrides})
        logger.info(f"Ablation run {run.name}: stages {', '.join(run.stages)}")
        result = run_pipeline(run_config, train, run.stages, init=stage1)
        report = evaluate(result.final, eval_data, perturb, run_config.seed, mode=run.eval_mode,
                          renormalize=run_config.renormalize_masked, constrained=run_config.constrained_decoding,
                          max_len=run_config.max_answer_len, threads=threads)
        reports[run.name] = report
        rows.append(_row(run, report))
    return pd.DataFrame(rows), reports

def _row(run : AblationRun, report : EvalReport) -> dict:
    row = {
        "name": run.name,
        "overrides": json.dumps(run.overrides, sort_keys=True),
        "stages": "+".join(run.stages),
        "eval_mode": run.eval_mode,
        "checkpoint_id": report.checkpoint_id,
        "accuracy": report.accuracy,
        "relevance_hit_rate": report.relevance_hit_rate,
        "mean_alpha_entropy": report.mean_alpha_entropy,
        "robust_accuracy": None if report.robustness is None else report.robustness.accuracy,
    }
    for m, mass in zip(MODALITIES, report.mean_modality_mass or (None,) * len(MODALITIES)):
        row[f"mass_{m}"] = mass
    return row

def write_table(table : pd.DataFrame, path : Path) -> None:
    table.to_csv(path, index=False)
    logger.info(f"Wrote {len(table)} ablation rows to {path}")

def parse_mask(mask : str) -> tuple[str, ...]:
    """Letters of the kept modalities ("AVS", "V", "" or "none") to the dropped modalities."""
    letters = "" if mask.lower() == "none" else mask.upper()
    known = {letter: m for m, letter in MODALITY_LETTERS.items()}
    unknown = set(letters) - set(known)
    if unknown:
        raise ConfigError("masks", f"unknown modality letters {sorted(unknown)} in {mask!r}")
    kept = {known[letter] for letter in letters}
    return tuple(m for m in MODALITIES if m not in kept)

def modality_contribution(source, dataset : Dataset, masks=("V", "AV", "AVS"), renormalize : bool = True, constrained : bool = True,
                          max_len : int = 4, threads : int = 1) -> dict[str, EvalReport]:
    """
    One report per subset of kept modalities; masked modalities become zero tokens before
    assembly. With every modality masked α is left unnormalised (all zero).
    """
    reports = {}
    for mask in masks:
        dropped = parse_mask(mask)
        renorm = renormalize and len(dropped) < len(MODALITIES)
        reports[mask] = evaluate(source, dataset, mode="gated", dropped=dropped, renormalize=renorm,
                                 constrained=constrained, max_len=max_len, threads=threads)
    return reports
