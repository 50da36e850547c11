"""gen-data: write a synthetic dataset directory."""
from pathlib import Path
from typing import List, Optional

import typer
from typing_extensions import Annotated

from ..misc import strings
from ..base.config import RunConfig
from ..streams import StreamSettings, Vocabulary
from ..streams.dataset import Dataset
from .common import GlobalOptions, exit_codes, load_config, say

def _gen_data(config : RunConfig, out : Path, n : int | None) -> Dataset:
    dataset = Dataset.generate(n or config.train_size, config.seed, StreamSettings.from_config(config), config.scenarios,
                               Vocabulary(config.vocab_size), config.threads)
    dataset.save(out)
    return dataset

def _configure_cli_app(app, execution_context, options : GlobalOptions):
    @app.command("gen-data", help=strings.CLI_SUBCOMMAND_GEN_DATA_HELP)
    @exit_codes
    def gen_data(
        out : Annotated[Path, typer.Option("--out", help=strings.CLI_OUT_HELP)],
        config : Annotated[Optional[Path], typer.Option("--config", help=strings.CLI_CONFIG_HELP)] = None,
        n : Annotated[Optional[int], typer.Option("--n", min=1, help=strings.CLI_N_HELP)] = None,
        seed : Annotated[Optional[int], typer.Option("--seed", help=strings.CLI_SEED_HELP)] = None,
        overrides : Annotated[Optional[List[str]], typer.Option("--set", help=strings.CLI_SET_HELP)] = None,
    ) -> None:
        run_config = load_config(options, config, overrides, seed)
        execution_context.seed = run_config.seed
        dataset = _gen_data(run_config, out, n)
        say(strings.GEN_DATA_DONE.format(n=len(dataset), path=out))

def configure_app(app, execution_context, options : GlobalOptions):
    """Register gen-data on the app."""
    _configure_cli_app(app, execution_context, options)
