"""One module per subcommand; each registers itself on the Typer app through configure_app."""
from . import ablate, evaluate, gen_data, gradcheck, perturb, train

COMMANDS = (gen_data, train, evaluate, ablate, perturb, gradcheck)

def configure_app(app, execution_context, options):
    """Register every subcommand on app."""
    for command in COMMANDS:
        command.configure_app(app, execution_context, options)
