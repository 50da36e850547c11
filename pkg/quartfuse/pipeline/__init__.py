"""The three-stage training pipeline: model groups, AdamW, checkpoints and stage runs."""
from .model import GROUPS, FusionModel, SampleLoss, diagnostics
from .optim import AdamW, Moments, adamw_step, adamw_update
from .checkpoint import Checkpoint, SHAPE_KEYS, checkpoint_load, checkpoint_save
from .stages import STAGES, PipelineResult, StageConfig, StageRunner, group_hashes, prepare_model, run_pipeline, run_stage, stage_name
