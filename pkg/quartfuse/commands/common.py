"""Helpers shared by the subcommands: config loading, dataset resolution and exit codes."""
from dataclasses import dataclass
from functools import wraps
from pathlib import Path
import logging

import typer

from ..base.config import RunConfig
from ..misc.exceptions import ConfigError, QuartfuseError
from ..misc.seeds import derive_seed
from ..streams import StreamSettings, Vocabulary
from ..streams.dataset import Dataset

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_CONTRACT = 3

@dataclass
class GlobalOptions:
    """Options given before the subcommand name."""
    threads: int | None = None

def parse_overrides(pairs : list[str] | None) -> dict:
    """KEY=VALUE strings to a dict; values stay strings and are coerced by RunConfig."""
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError("set", f"expected KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides

def load_config(options : GlobalOptions, config_path : Path | None = None, overrides : list[str] | None = None, seed : int | None = None,
                base : dict | None = None) -> RunConfig:
    """
    Layer base (e.g. a checkpoint's snapshot), config file, environment, --set pairs, then
    --seed and --threads. Shape keys from base are not pinned here; a checkpoint rejects a
    layer that changes them through check_compatible.
    """
    flags = parse_overrides(overrides)
    if seed is not None:
        flags["seed"] = seed
    if options.threads is not None:
        flags["threads"] = options.threads
    return RunConfig(config_path, overrides=flags, base=base)

def resolve_dataset(path : Path | None, config : RunConfig, purpose : str) -> Dataset:
    """Load the dataset at path, else the one configured for purpose ("train" or "eval"), else generate it from the seed."""
    path = path or (Path(getattr(config, f"{purpose}_data")) if getattr(config, f"{purpose}_data") else None)
    if path is not None:
        return Dataset.load(path)
    n = getattr(config, f"{purpose}_size")
    logger.info(f"No {purpose} dataset given; generating {n} samples")
    return Dataset.generate(n, derive_seed(config.seed, f"{purpose}-data"), StreamSettings.from_config(config), config.scenarios,
                            Vocabulary(config.vocab_size), config.threads)

def say(message : str) -> None:
    """Human-readable summary on standard error."""
    typer.echo(message, err=True)

def exit_codes(command):
    """Map ConfigError to exit 2 and every other quartfuse error to exit 3."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as e:
            logger.error(f"Invalid configuration: {e}")
            say(f"error: {e}")
            raise typer.Exit(EXIT_CONFIG) from e
        except QuartfuseError as e:
            logger.error(f"{type(e).__name__}: {e}")
            say(f"error: {type(e).__name__}: {e}")
            raise typer.Exit(EXIT_CONTRACT) from e

    return wrapper
