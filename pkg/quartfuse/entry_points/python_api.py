"""The operations scripts and notebooks use, importable from the top-level package."""

from ..base.config import RunConfig
from ..base.execution_context import ExecutionContext
from ..base.run_dir import RunDirectory
from ..streams import Dataset, MultimodalSample, StreamSettings, Vocabulary, assemble, encode, gen_sample, oracle_answer, project
from ..quart import QuartConfig, attend, forward, fuse, modality_mass, relevance
from ..decoder import decode_logits, greedy_decode, lora_merge, loss_quart, loss_reg, loss_total
from ..perturb import PerturbationRecord, PerturbationSpec, generate_mismatch, perturb_dataset
from ..pipeline import Checkpoint, FusionModel, StageConfig, adamw_step, checkpoint_load, checkpoint_save, run_pipeline, run_stage
from ..evalkit import EvalReport, ablation_matrix, evaluate, evaluate_oracle, modality_contribution
from ..commands.gradcheck import objective_grad_check
