"""ablate: train a grid of runs on top of one stage-I checkpoint and tabulate their reports."""
from pathlib import Path
from typing import List, Optional

import typer
from typing_extensions import Annotated

from ..misc import strings
from ..evalkit import ablation_matrix, load_grid, write_table
from ..perturb import PerturbationSpec
from ..pipeline import checkpoint_load
from .common import GlobalOptions, exit_codes, load_config, resolve_dataset, say

def _configure_cli_app(app, execution_context, options : GlobalOptions):
    @app.command("ablate", help=strings.CLI_SUBCOMMAND_ABLATE_HELP)
    @exit_codes
    def ablate(
        grid : Annotated[str, typer.Option("--grid", help=strings.CLI_GRID_HELP)],
        out : Annotated[Path, typer.Option("--out", help=strings.CLI_OUT_HELP)],
        config : Annotated[Optional[Path], typer.Option("--config", help=strings.CLI_CONFIG_HELP)] = None,
        data : Annotated[Optional[Path], typer.Option("--data", help=strings.CLI_DATA_HELP)] = None,
        eval_data : Annotated[Optional[Path], typer.Option("--eval-data", help=strings.CLI_EVAL_DATA_HELP)] = None,
        stage1 : Annotated[Optional[Path], typer.Option("--stage1", help=strings.CLI_STAGE1_HELP)] = None,
        perturb : Annotated[bool, typer.Option("--perturb", help=strings.CLI_PERTURB_HELP)] = False,
        seed : Annotated[Optional[int], typer.Option("--seed", help=strings.CLI_SEED_HELP)] = None,
        overrides : Annotated[Optional[List[str]], typer.Option("--set", help=strings.CLI_SET_HELP)] = None,
    ) -> None:
        run_config = load_config(options, config, overrides, seed)
        execution_context.seed = run_config.seed
        runs = load_grid(grid)
        shared = checkpoint_load(stage1) if stage1 else None
        if shared is not None:
            shared.check_compatible(run_config.to_dict())
        spec = PerturbationSpec.from_config(run_config) if perturb else None
        table, _ = ablation_matrix(run_config, runs, resolve_dataset(data, run_config, "train"), resolve_dataset(eval_data, run_config, "eval"),
                                   stage1=shared, perturb=spec, threads=run_config.threads)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_table(table, out)
        say(strings.ABLATE_DONE.format(rows=len(table), path=out))

def configure_app(app, execution_context, options : GlobalOptions):
    """Register ablate on the app."""
    _configure_cli_app(app, execution_context, options)
