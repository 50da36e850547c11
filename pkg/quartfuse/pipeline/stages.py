"""
The three training stages.

  I    caption pretraining: each stream's projection learns to make the frozen decoder
       name the word planted in that stream; only projections train.
  II   answer training: gating module and LoRA adapters from scratch, λ = 0.
  III  the same objective over mismatch-perturbed batches with the entropy term switched on.

Every batch, perturbation and initialisation draws from seeds derived from the master
seed and the step, so a stage resumed from a mid-stage checkpoint continues bit for bit.
"""
from dataclasses import dataclass, field
from functools import reduce
import hashlib
import logging

import numpy as np

from ..base.config import RunConfig
from ..base.run_dir import RunDirectory
from ..misc.exceptions import ContractError, FreezeViolationError, InputError
from ..misc.seeds import rng_for
from ..numcore import ops
from ..perturb import PerturbationSpec, generate_mismatch, sample_seed
from ..streams import MODALITIES
from .checkpoint import Checkpoint, checkpoint_save
from .model import GROUPS, FusionModel, diagnostics
from .optim import AdamW

logger = logging.getLogger(__name__)

STAGES = ("I", "II", "III")
STAGE_ALIASES = {"1": "I", "2": "II", "3": "III", "I": "I", "II": "II", "III": "III"}
TRAINABLE = {"I": frozenset({"projections"}), "II": frozenset({"quart", "lora"}), "III": frozenset({"quart", "lora"})}
LR_KEYS = {"projections": "lr_projections", "quart": "lr_quart", "lora": "lr_lora"}

# Gating module and adapters start from scratch in stage II; these keys may differ from a stage I checkpoint.
FRESH_IN_STAGE_II = ("quart_heads", "quart_head_dim", "lora_rank")

def stage_name(stage) -> str:
    try:
        return STAGE_ALIASES[str(stage)]
    except KeyError:
        raise ContractError(f"unknown stage {stage!r}; expected I, II or III") from None

@dataclass(frozen=True)
class StageConfig:
    """Everything one stage run needs beyond the model and the data."""
    stage: str
    trainable: frozenset
    frozen: frozenset
    lam: float
    context_mode: str
    loss_conditioning: str
    lora_rank: int
    lrs: dict
    steps: int
    batch_size: int
    seed: int
    weight_decay: float = 0.03
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 0.0
    reg_sign: str = "as_written"
    schedule: str = "sequential"
    perturb: PerturbationSpec | None = None
    log_every: int = 50
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ContractError(f"unknown stage {self.stage!r}")
        if self.trainable & self.frozen:
            raise ContractError(f"groups {sorted(self.trainable & self.frozen)} are both trainable and frozen")
        if self.trainable | self.frozen != set(GROUPS):
            raise ContractError(f"trainable and frozen groups must cover {', '.join(GROUPS)}")
        if self.trainable != TRAINABLE[self.stage]:
            raise ContractError(f"stage {self.stage} trains {sorted(TRAINABLE[self.stage])}, not {sorted(self.trainable)}")
        if self.stage in ("I", "II") and self.lam != 0:
            raise ContractError(f"stage {self.stage} runs with λ = 0, got {self.lam}")
        if (self.perturb is not None) != (self.stage == "III"):
            raise ContractError("perturbed batches are used in stage III and only there")
        if set(self.lrs) != set(self.trainable):
            raise ContractError(f"learning rates given for {sorted(self.lrs)}, trainable groups are {sorted(self.trainable)}")

    @classmethod
    def from_config(cls, config : RunConfig, stage) -> "StageConfig":
        stage = stage_name(stage)
        trainable = TRAINABLE[stage]
        return cls(
            stage=stage,
            trainable=trainable,
            frozen=frozenset(GROUPS) - trainable,
            lam=config.lambda_reg if stage == "III" else 0.0,
            context_mode="raw" if stage == "I" or config.loss_conditioning == "on_Z" else "gated",
            loss_conditioning=config.loss_conditioning,
            lora_rank=config.lora_rank,
            lrs={group: getattr(config, LR_KEYS[group]) for group in trainable},
            steps=getattr(config, f"stage{STAGES.index(stage) + 1}_steps"),
            batch_size=config.batch_size,
            seed=config.seed,
            weight_decay=config.weight_decay,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.adam_eps,
            grad_clip=config.grad_clip,
            reg_sign=config.reg_sign,
            schedule=config.stage1_schedule,
            perturb=PerturbationSpec.from_config(config) if stage == "III" else None,
            log_every=config.log_every,
            checkpoint_every=config.checkpoint_every,
        )

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "trainable": sorted(self.trainable),
            "frozen": sorted(self.frozen),
            "lam": self.lam,
            "context_mode": self.context_mode,
            "loss_conditioning": self.loss_conditioning,
            "lora_rank": self.lora_rank,
            "lrs": dict(sorted(self.lrs.items())),
            "steps": self.steps,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "weight_decay": self.weight_decay,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "grad_clip": self.grad_clip,
            "reg_sign": self.reg_sign,
            "schedule": self.schedule,
            "perturb": None if self.perturb is None else self.perturb.to_dict(),
            "log_every": self.log_every,
            "checkpoint_every": self.checkpoint_every,
        }

def group_hashes(model : FusionModel, groups) -> dict[str, str]:
    """SHA-256 over every tensor of each group, in name order."""
    hashes = {}
    for group, params in model.groups().items():
        if group not in groups:
            continue
        digest = hashlib.sha256()
        for name in sorted(params):
            digest.update(name.encode("utf8"))
            digest.update(params[name].data.tobytes())
        hashes[group] = digest.hexdigest()
    return hashes

class StageRunner():
    """Runs one stage on one model; the metric records of the steps it ran are kept in .records."""

    def __init__(self, config : StageConfig, model : FusionModel, dataset, run_config : RunConfig,
                 run_dir : RunDirectory | None = None, context : dict | None = None):
        self._logger = logging.getLogger(__name__)
        if len(dataset) < 1:
            raise InputError("cannot train on an empty dataset")
        model.check_dataset(dataset.settings)
        self.config = config
        self.model = model
        self.dataset = dataset
        self.run_config = run_config
        self.run_dir = run_dir
        self.context = context or {}
        self.records : list[dict] = []
        model.set_trainable(config.trainable)
        groups = {g: p for g, p in model.groups().items() if g in config.trainable}
        self.optimizer = AdamW(groups, config.lrs, config.beta1, config.beta2, config.eps, config.weight_decay, config.grad_clip)

    def batch(self, step : int) -> list:
        rng = rng_for(self.config.seed, "batch", self.config.stage, step)
        return [self.dataset[int(i)] for i in rng.integers(len(self.dataset), size=self.config.batch_size)]

    def sample_losses(self, step : int) -> list:
        samples = self.batch(step)
        c = self.config
        if c.stage == "I":
            modalities = [MODALITIES[step % len(MODALITIES)]] if c.schedule == "sequential" else list(MODALITIES)
            return [self.model.caption_loss(s, m) for s in samples for m in modalities]
        if c.perturb is not None:
            samples = [generate_mismatch(s, c.perturb, sample_seed(c.seed, step, s.sample_id), self.dataset)[0] for s in samples]
        losses = [self.model.answer_loss(s, c.loss_conditioning, c.lam, c.reg_sign) for s in samples]
        if any(l.output is None for l in losses):
            # raw conditioning without the regulariser: α is only a diagnostic here
            with self.model.workspace.no_grad():
                for loss, sample in zip(losses, samples):
                    if loss.output is None:
                        loss.output = self.model.forward(sample, "gated")
        return losses

    def step(self, step : int) -> dict:
        losses = self.sample_losses(step)
        if self.config.lam == 0 and any(l.total is not l.quart or l.reg is not None for l in losses):
            raise ContractError(f"stage {self.config.stage} runs with λ = 0 but a regulariser entered the loss")
        total = ops.scale(reduce(ops.add, [l.total for l in losses]), 1.0 / len(losses))
        quart_mean = float(np.mean([l.quart.item() for l in losses]))

        self.optimizer.zero_grad()
        ops.backward(total)
        grad_norm = self.optimizer.step()
        self.model.workspace.clear()

        record = {"stage": self.config.stage, "step": step, "loss_total": total.item(), "loss_quart": quart_mean,
                  "loss_reg": None, "alpha_entropy": None, "modality_mass": None, "grad_norm": grad_norm}
        stats = [diagnostics(l.output) for l in losses]
        if stats and all(stats):
            entropy = float(np.mean([s["alpha_entropy"] for s in stats]))
            record["alpha_entropy"] = entropy
            record["loss_reg"] = -entropy
            record["modality_mass"] = [float(x) for x in np.mean([s["modality_mass"] for s in stats], axis=0)]
        return record

    def checkpoint(self, step : int, complete : bool) -> Checkpoint:
        summary = {"last": self.records[-1]} if self.records else {}
        return Checkpoint(
            stage=self.config.stage,
            step=step,
            complete=complete,
            config=self.run_config.to_dict(),
            params={name: t.data.copy() for name, t in self.model.named_parameters().items()},
            moments=self.optimizer.state_arrays(),
            optimizer_steps=self.optimizer.steps(),
            stage_config=self.config.to_dict(),
            context=self.context,
            metrics=summary,
        )

    def run(self, start_step : int = 0) -> Checkpoint:
        c = self.config
        frozen_before = group_hashes(self.model, c.frozen)
        self._logger.info(f"Stage {c.stage}: steps {start_step}..{c.steps} training {', '.join(sorted(c.trainable))}")
        if self.run_dir is not None:
            self.run_dir.truncate_metrics(c.stage, start_step)

        for step in range(start_step, c.steps):
            record = self.step(step)
            self.records.append(record)
            if self.run_dir is not None:
                self.run_dir.append_metrics(record)
            if (step + 1) % c.log_every == 0 or step == c.steps - 1:
                self._logger.info(f"stage {c.stage} step {step + 1}/{c.steps} loss {record['loss_total']:.4f}")
            if self.run_dir is not None and c.checkpoint_every and (step + 1) % c.checkpoint_every == 0 and step + 1 < c.steps:
                checkpoint_save(self.checkpoint(step + 1, complete=False), self.run_dir.checkpoint_path(c.stage))

        frozen_after = group_hashes(self.model, c.frozen)
        for group in sorted(c.frozen):
            if frozen_before[group] != frozen_after[group]:
                self._logger.error(f"Frozen group {group} changed during stage {c.stage}")
                raise FreezeViolationError(f"frozen group {group} changed during stage {c.stage}")

        checkpoint = self.checkpoint(c.steps, complete=True)
        if self.run_dir is not None:
            checkpoint_save(checkpoint, self.run_dir.checkpoint_path(c.stage))
        return checkpoint

def prepare_model(config : StageConfig, run_config : RunConfig, init : Checkpoint | None, cold_start : bool = False) -> tuple[FusionModel, int, Checkpoint | None]:
    """
    Build the model for a stage and decide where it starts.

    Returns the model, the step to start from and, when init belongs to the same stage,
    the checkpoint whose optimizer state must be restored.
    """
    model = FusionModel.from_config(run_config)
    stage_index = STAGES.index(config.stage)
    if init is None:
        if stage_index > 0 and not cold_start:
            raise ContractError(f"stage {config.stage} needs a stage {STAGES[stage_index - 1]} checkpoint (or an explicit cold start)")
        return model, 0, None

    init_index = STAGES.index(init.stage)
    if init_index == stage_index:
        init.check_compatible(run_config.to_dict())
        model.load_arrays(init.params)
        return model, min(init.step, config.steps), init
    if init_index == stage_index - 1:
        if not init.complete:
            raise ContractError(f"stage {init.stage} checkpoint is incomplete (step {init.step}); finish it first")
        if config.stage == "II":
            init.check_compatible(run_config.to_dict(), ignore=FRESH_IN_STAGE_II)
            model.load_arrays(init.params, groups=("encoders", "projections", "decoder"))
        else:
            init.check_compatible(run_config.to_dict())
            model.load_arrays(init.params)
        return model, 0, None
    raise ContractError(f"a stage {init.stage} checkpoint cannot start stage {config.stage}")

def run_stage(config : StageConfig, dataset, init : Checkpoint | None, run_config : RunConfig, run_dir : RunDirectory | None = None,
              cold_start : bool = False, context : dict | None = None) -> Checkpoint:
    """Run (or resume) one stage and return its final checkpoint."""
    model, start_step, resume_from = prepare_model(config, run_config, init, cold_start)
    runner = StageRunner(config, model, dataset, run_config, run_dir, context)
    if resume_from is not None:
        runner.optimizer.load_state(resume_from.optimizer_steps, resume_from.moments)
        logger.info(f"Resuming stage {config.stage} at step {start_step}")
    return runner.run(start_step)

@dataclass
class PipelineResult:
    checkpoints: dict = field(default_factory=dict)

    @property
    def final(self) -> Checkpoint | None:
        for stage in reversed(STAGES):
            if stage in self.checkpoints:
                return self.checkpoints[stage]
        return None

def run_pipeline(run_config : RunConfig, dataset, stages=STAGES, init : Checkpoint | None = None, run_dir : RunDirectory | None = None,
                 cold_start : bool = False, context : dict | None = None) -> PipelineResult:
    """Run the given stages in order, each starting from the previous one's checkpoint."""
    result = PipelineResult()
    current = init
    for i, stage in enumerate(stage_name(s) for s in stages):
        config = StageConfig.from_config(run_config, stage)
        current = run_stage(config, dataset, current, run_config, run_dir, cold_start=cold_start and i == 0, context=context)
        result.checkpoints[stage] = current
    return result
