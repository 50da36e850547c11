"""gradcheck: finite-difference check of the whole training objective on one synthetic sample."""
from pathlib import Path
from typing import List, Optional
import json

import typer
from typing_extensions import Annotated

from ..misc import strings
from ..base.config import RunConfig
from ..misc.seeds import derive_seed
from ..numcore import grad_check, ops
from ..pipeline import FusionModel
from ..streams import MODALITIES, gen_sample
from .common import EXIT_CONTRACT, GlobalOptions, exit_codes, load_config, say

TOLERANCE = 1e-4
CHECKED_GROUPS = ("projections", "quart", "decoder", "lora")

def objective_grad_check(config : RunConfig, eps : float = 1e-6, entries : int | None = None) -> float:
    """
    Answer loss with the entropy term plus every caption loss, checked over projections,
    gating module, decoder and adapters in 64-bit precision.
    """
    config = RunConfig.from_dict({**config.to_dict(), "precision": "f64"})
    model = FusionModel.from_config(config)
    model.set_trainable(CHECKED_GROUPS)
    sample = gen_sample(derive_seed(config.seed, "gradcheck"), config.scenarios[0], model.settings, model.vocab)
    lam = config.lambda_reg if config.lambda_reg > 0 else 0.001

    def objective():
        total = model.answer_loss(sample, config.loss_conditioning, lam, config.reg_sign).total
        for m in MODALITIES:
            total = ops.add(total, model.caption_loss(sample, m).total)
        return total

    params = [t for group, named in model.groups().items() if group in CHECKED_GROUPS for t in named.values()]
    return grad_check(objective, params, eps, entries=entries, seed=config.seed)

def _configure_cli_app(app, execution_context, options : GlobalOptions):
    @app.command("gradcheck", help=strings.CLI_SUBCOMMAND_GRADCHECK_HELP)
    @exit_codes
    def gradcheck(
        config : Annotated[Optional[Path], typer.Option("--config", help=strings.CLI_CONFIG_HELP)] = None,
        eps : Annotated[float, typer.Option("--eps", help=strings.CLI_EPS_HELP)] = 1e-6,
        entries : Annotated[Optional[int], typer.Option("--entries", min=1, help=strings.CLI_ENTRIES_HELP)] = None,
        seed : Annotated[Optional[int], typer.Option("--seed", help=strings.CLI_SEED_HELP)] = None,
        overrides : Annotated[Optional[List[str]], typer.Option("--set", help=strings.CLI_SET_HELP)] = None,
    ) -> None:
        run_config = load_config(options, config, overrides, seed)
        execution_context.seed = run_config.seed
        error = objective_grad_check(run_config, eps, entries)
        typer.echo(json.dumps({"max_rel_error": error, "tolerance": TOLERANCE, "eps": eps}, sort_keys=True))
        say(strings.GRADCHECK_DONE.format(error=error, tolerance=TOLERANCE))
        if not error < TOLERANCE:
            raise typer.Exit(EXIT_CONTRACT)

def configure_app(app, execution_context, options : GlobalOptions):
    """Register gradcheck on the app."""
    _configure_cli_app(app, execution_context, options)
