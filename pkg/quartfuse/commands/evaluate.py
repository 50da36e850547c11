"""eval: score a checkpoint and write an EvalReport JSON."""
from pathlib import Path
from typing import List, Optional
import json

import typer
from typing_extensions import Annotated

from ..misc import strings
from ..base.config import RunConfig
from ..evalkit import evaluate, modality_contribution
from ..perturb import PerturbationSpec
from ..pipeline import Checkpoint, checkpoint_load
from ..quart import MODES
from ..misc.exceptions import ConfigError
from .common import GlobalOptions, exit_codes, load_config, resolve_dataset, say

def _evaluate(checkpoint : Checkpoint, config : RunConfig, data : Path | None, perturb : bool, mode : str, masks : bool) -> dict:
    dataset = resolve_dataset(data, config, "eval")
    spec = PerturbationSpec.from_config(config) if perturb else None
    report = evaluate(checkpoint, dataset, spec, config.seed, mode=mode, renormalize=config.renormalize_masked,
                      constrained=config.constrained_decoding, max_len=config.max_answer_len, threads=config.threads)
    result = report.to_dict()
    if masks:
        subsets = modality_contribution(checkpoint, dataset, renormalize=config.renormalize_masked, constrained=config.constrained_decoding,
                                        max_len=config.max_answer_len, threads=config.threads)
        result["modality_contribution"] = {mask: r.to_dict() for mask, r in subsets.items()}
    return result

def _configure_cli_app(app, execution_context, options : GlobalOptions):
    @app.command("eval", help=strings.CLI_SUBCOMMAND_EVAL_HELP)
    @exit_codes
    def eval_command(
        checkpoint : Annotated[Path, typer.Option("--checkpoint", help=strings.CLI_CHECKPOINT_HELP)],
        data : Annotated[Optional[Path], typer.Option("--data", help=strings.CLI_DATA_HELP)] = None,
        perturb : Annotated[bool, typer.Option("--perturb", help=strings.CLI_PERTURB_HELP)] = False,
        report : Annotated[Optional[Path], typer.Option("--report", help=strings.CLI_REPORT_HELP)] = None,
        mode : Annotated[str, typer.Option("--mode", help=strings.CLI_MODE_HELP)] = "gated",
        masks : Annotated[bool, typer.Option("--masks", help=strings.CLI_MASKS_HELP)] = False,
        seed : Annotated[Optional[int], typer.Option("--seed", help=strings.CLI_SEED_HELP)] = None,
        overrides : Annotated[Optional[List[str]], typer.Option("--set", help=strings.CLI_SET_HELP)] = None,
    ) -> None:
        if mode not in MODES:
            raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
        loaded = checkpoint_load(checkpoint)
        run_config = load_config(options, None, overrides, seed, base=loaded.config)
        loaded.check_compatible(run_config.to_dict())
        execution_context.seed = run_config.seed
        result = _evaluate(loaded, run_config, data, perturb, mode, masks)
        text = json.dumps(result, sort_keys=True, indent=2)
        if report is None:
            typer.echo(text)
        else:
            report.write_text(text + "\n", encoding="utf8")
        say(strings.EVAL_DONE.format(accuracy=result["accuracy"], hit_rate=result["relevance_hit_rate"]))

def configure_app(app, execution_context, options : GlobalOptions):
    """Register eval on the app."""
    _configure_cli_app(app, execution_context, options)
