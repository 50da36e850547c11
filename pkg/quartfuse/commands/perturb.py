"""perturb: write a mismatch-perturbed copy of a dataset together with its perturbation records."""
from pathlib import Path
from typing import List, Optional
import json

import typer
from typing_extensions import Annotated

from ..misc import strings
from ..misc.exceptions import ConfigError
from ..perturb import PerturbationSpec, perturb_dataset
from ..streams.dataset import Dataset
from .common import GlobalOptions, exit_codes, load_config, say

SPEC_KEYS = ("sigma_rel", "coin_probability", "perturb_audio_ops", "perturb_video_ops", "perturb_sensor_ops", "video_extra_ops")

def _read_spec(path : Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("spec", f"cannot read {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("spec", "a spec file holds a JSON object")
    unknown = set(data) - set(SPEC_KEYS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], f"not a perturbation key (expected {', '.join(SPEC_KEYS)})")
    return data

def _configure_cli_app(app, execution_context, options : GlobalOptions):
    @app.command("perturb", help=strings.CLI_SUBCOMMAND_PERTURB_HELP)
    @exit_codes
    def perturb(
        data : Annotated[Path, typer.Option("--data", help=strings.CLI_DATA_HELP)],
        out : Annotated[Path, typer.Option("--out", help=strings.CLI_OUT_HELP)],
        spec : Annotated[Optional[Path], typer.Option("--spec", help=strings.CLI_SPEC_HELP)] = None,
        config : Annotated[Optional[Path], typer.Option("--config", help=strings.CLI_CONFIG_HELP)] = None,
        seed : Annotated[Optional[int], typer.Option("--seed", help=strings.CLI_SEED_HELP)] = None,
        overrides : Annotated[Optional[List[str]], typer.Option("--set", help=strings.CLI_SET_HELP)] = None,
    ) -> None:
        run_config = load_config(options, config, overrides, seed)
        for key, value in _read_spec(spec).items():
            run_config.set_key(key, value)
        execution_context.seed = run_config.seed
        dataset = Dataset.load(data)
        perturbed, records = perturb_dataset(dataset, PerturbationSpec.from_config(run_config), run_config.seed, "eval", run_config.threads)
        perturbed.save(out, extra_records=[r.to_dict() for r in records])
        changed = sum(1 for r in records if r.perturbed_modalities)
        say(strings.PERTURB_DONE.format(n=len(records), changed=changed, path=out))

def configure_app(app, execution_context, options : GlobalOptions):
    """Register perturb on the app."""
    _configure_cli_app(app, execution_context, options)
