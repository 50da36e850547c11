"""Create classes for run directories and transactional checkpoint writes."""

from pathlib import Path
import logging
import json
import os

from ..misc.exceptions import ContractError, FormatError

CHECKPOINTS_FOLDER_NAME = "checkpoints"
METRICS_FILE_NAME = "metrics.jsonl"
CONFIG_FILE_NAME = "config.json"
CONTEXT_FILE_NAME = "context.json"

class CheckpointWriteSession:
    """
    Context manager for writing one checkpoint file. The bytes go to a temporary file
    which replaces the target only if the context exits successfully.

    Sample usage:
        with CheckpointWriteSession(run_dir.checkpoint_path("II")) as f:
            f.write(payload)
    """
    locked_paths = []

    def __init__(self, path : Path):
        self.path = Path(path)
        self._temporary_path = self.path.with_name(self.path.name + ".partial")
        self._file = None
        self._logger = logging.getLogger(__name__)

    def __enter__(self):
        """Open the temporary file for writing."""
        if self.path in CheckpointWriteSession.locked_paths:
            raise ContractError(f"Checkpoint {self.path} is already open in another CheckpointWriteSession")

        CheckpointWriteSession.locked_paths.append(self.path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self._temporary_path, "wb")

        self._logger.debug(f"Started write session for checkpoint {self.path}")
        return self._file

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Move the new file into place, or keep the previous one on failure."""
        self._file.close()

        if exc_type is None:
            os.replace(self._temporary_path, self.path)
            self._logger.info(f"Saved checkpoint {self.path}")
        else:
            self._temporary_path.unlink(missing_ok=True)
            if self.path.exists():
                self._logger.error(f"Exception while writing checkpoint; the previous version is still at {self.path}")
            else:
                self._logger.error(f"Exception while writing checkpoint {self.path}; nothing was saved")

        # Release the path regardless of exception
        if self.path in CheckpointWriteSession.locked_paths:
            CheckpointWriteSession.locked_paths.remove(self.path)

        return False # do not suppress exceptions

class RunDirectory():
    """A training run's directory: config and context snapshots, the metrics log and stage checkpoints."""

    def __init__(self, run_path : Path):
        """Open an existing run directory."""

        self._logger = logging.getLogger(__name__)

        if not run_path.is_dir():
            raise FormatError(f"run path '{run_path}' does not exist or is not a directory.")

        self._run_path = run_path
        checkpoints_dir = run_path / CHECKPOINTS_FOLDER_NAME
        if not checkpoints_dir.is_dir():
            self._logger.warning(f"Checkpoints directory {checkpoints_dir} missing. Creating a new one.")
            checkpoints_dir.mkdir()

    @staticmethod
    def create_new(run_path : Path, config : dict, context : dict) -> "RunDirectory":
        """Create (or reuse) a run directory and write the config and context snapshots into it."""

        run_path = Path(run_path)
        run_path.mkdir(parents=True, exist_ok=True)
        (run_path / CHECKPOINTS_FOLDER_NAME).mkdir(exist_ok=True)
        (run_path / CONFIG_FILE_NAME).write_text(json.dumps(config, sort_keys=True, indent=2), encoding="utf8")
        (run_path / CONTEXT_FILE_NAME).write_text(json.dumps(context, sort_keys=True, indent=2), encoding="utf8")
        return RunDirectory(run_path)

    def __str__(self) -> str:
        return f"RunDirectory(path={self.run_path})"

    def checkpoint_path(self, stage : str) -> Path:
        return self._run_path / CHECKPOINTS_FOLDER_NAME / f"stage{stage}.ckpt"

    def latest_checkpoint(self) -> Path | None:
        """The checkpoint of the latest stage present, if any."""
        for stage in ("III", "II", "I"):
            if self.checkpoint_path(stage).exists():
                return self.checkpoint_path(stage)
        return None

    def append_metrics(self, record : dict) -> None:
        """Append one JSON line to metrics.jsonl."""
        with open(self.metrics_path, "a", encoding="utf8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    def read_metrics(self) -> list[dict]:
        if not self.metrics_path.exists():
            return []
        with open(self.metrics_path, "r", encoding="utf8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def truncate_metrics(self, stage : str, step : int) -> None:
        """Drop records of `stage` at or after `step`, so a resumed run does not log a step twice."""
        kept = [r for r in self.read_metrics() if not (r["stage"] == stage and r["step"] >= step)]
        with open(self.metrics_path, "w", encoding="utf8") as f:
            for record in kept:
                f.write(json.dumps(record, sort_keys=True) + "\n")

    def read_config(self) -> dict:
        config_file = self._run_path / CONFIG_FILE_NAME
        if not config_file.exists():
            self._logger.error(f"Config snapshot {config_file} missing.")
            raise FormatError(f"Config snapshot {config_file} missing.")
        return json.loads(config_file.read_text(encoding="utf8"))

    @property
    def metrics_path(self) -> Path:
        return self._run_path / METRICS_FILE_NAME

    @property
    def run_path(self) -> Path:
        """Get the path to the run directory."""
        return self._run_path
