"""
This module creates the Typer app: its help text, the callback handling the options
shared by every subcommand, and the registration of the subcommands themselves.

Human-readable output goes to standard error; standard output and the files a command
writes carry only JSON, JSONL or CSV.
"""

import logging
from typing import Optional

# Third-party imports
import typer
from typing_extensions import Annotated

# Local imports
from ..misc import strings
from .. import commands
from ..base.execution_context import ExecutionContext
from ..commands.common import GlobalOptions

app = typer.Typer(
    no_args_is_help=True,
    help=strings.QUARTFUSE_CLI_DESCRIPTION
)

APP_NAME = "quartfuse"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)

execution_context = ExecutionContext()
options = GlobalOptions()

@app.callback()
def app_callback(
    verbose : Annotated[int, typer.Option("--verbose", "-v", count=True, help=strings.CLI_VERBOSE_HELP)] = 0,
    threads : Annotated[Optional[int], typer.Option("--threads", min=1, help=strings.CLI_THREADS_HELP)] = None,
):
    """Configure logging to standard error and remember the shared options."""
    logging.basicConfig(level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)], format=LOG_FORMAT, force=True)
    options.threads = threads

commands.configure_app(app, execution_context, options)

def main():
    app(prog_name=APP_NAME)
