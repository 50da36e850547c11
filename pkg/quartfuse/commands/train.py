"""train: run one stage or the whole pipeline into a run directory."""
from pathlib import Path
from typing import List, Optional
import logging

import typer
from typing_extensions import Annotated

from ..misc import strings
from ..base.config import RunConfig
from ..base.run_dir import RunDirectory
from ..misc.exceptions import ConfigError
from ..pipeline import STAGES, Checkpoint, checkpoint_load, run_pipeline, stage_name
from .common import GlobalOptions, exit_codes, load_config, resolve_dataset, say

logger = logging.getLogger(__name__)

def _stages_to_run(stage : str, resume : Checkpoint | None) -> tuple[str, ...]:
    if stage == "all":
        start = 0 if resume is None else STAGES.index(resume.stage) + (1 if resume.complete else 0)
        return STAGES[start:]
    return (stage_name(stage),)

def _initial_checkpoint(stages : tuple[str, ...], resume : Checkpoint | None, run_dir : RunDirectory) -> Checkpoint | None:
    """An explicit --resume wins; otherwise the previous stage's checkpoint from the run directory, if any."""
    if resume is not None or not stages:
        return resume
    index = STAGES.index(stages[0])
    if index == 0:
        return None
    previous = run_dir.checkpoint_path(STAGES[index - 1])
    if previous.exists():
        logger.info(f"Starting stage {stages[0]} from {previous}")
        return checkpoint_load(previous)
    return None

def _train(config : RunConfig, stage : str, out : Path, data : Path | None, resume_path : Path | None, cold_start : bool, context : dict) -> dict:
    resume = checkpoint_load(resume_path) if resume_path else None
    stages = _stages_to_run(stage, resume)
    run_dir = RunDirectory.create_new(out, config.to_dict(), context)
    init = _initial_checkpoint(stages, resume, run_dir)
    dataset = resolve_dataset(data, config, "train")
    return run_pipeline(config, dataset, stages, init=init, run_dir=run_dir, cold_start=cold_start, context=context).checkpoints

def _configure_cli_app(app, execution_context, options : GlobalOptions):
    @app.command("train", help=strings.CLI_SUBCOMMAND_TRAIN_HELP)
    @exit_codes
    def train(
        out : Annotated[Path, typer.Option("--out", help=strings.CLI_OUT_HELP)],
        stage : Annotated[str, typer.Option("--stage", help=strings.CLI_STAGE_HELP)] = "all",
        config : Annotated[Optional[Path], typer.Option("--config", help=strings.CLI_CONFIG_HELP)] = None,
        resume : Annotated[Optional[Path], typer.Option("--resume", help=strings.CLI_RESUME_HELP)] = None,
        data : Annotated[Optional[Path], typer.Option("--data", help=strings.CLI_DATA_HELP)] = None,
        cold_start : Annotated[bool, typer.Option("--cold-start", help=strings.CLI_COLD_START_HELP)] = False,
        seed : Annotated[Optional[int], typer.Option("--seed", help=strings.CLI_SEED_HELP)] = None,
        overrides : Annotated[Optional[List[str]], typer.Option("--set", help=strings.CLI_SET_HELP)] = None,
    ) -> None:
        if stage not in ("1", "2", "3", "all"):
            raise ConfigError("stage", f"must be 1, 2, 3 or all, got {stage!r}")
        run_config = load_config(options, config, overrides, seed)
        execution_context.seed = run_config.seed
        checkpoints = _train(run_config, stage, out, data, resume, cold_start, execution_context.to_dict())
        for name, checkpoint in checkpoints.items():
            last = checkpoint.metrics.get("last", {})
            say(strings.TRAIN_DONE.format(stage=name, step=checkpoint.step, loss=last.get("loss_total", float("nan"))))

def configure_app(app, execution_context, options : GlobalOptions):
    """Register train on the app."""
    _configure_cli_app(app, execution_context, options)
