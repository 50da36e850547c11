"""Module to create dataclass ExecutionContext"""
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
import os
import platform
import sys

from .. import __version__

@dataclass
class ExecutionContext():
    """Where, when, by whom and with which master seed and package version a run was started."""
    cwd: Path = field(default_factory=Path.cwd)
    time: datetime = field(default_factory=datetime.now)
    machine: str = field(default_factory=lambda: os.environ.get("HOST", "") or platform.node())
    user: str = field(default_factory=lambda: os.environ.get("USER", ""))
    command: list[str] = field(default_factory=lambda: list(sys.argv))
    seed: int | None = None
    version: str = __version__

    def to_dict(self) -> dict:
        """The snapshot written to context.json and into checkpoint metadata."""
        return {
            "cwd": str(self.cwd),
            "time": self.time.isoformat(),
            "machine": self.machine,
            "user": self.user,
            "command": list(self.command),
            "seed": self.seed,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, data : dict) -> "ExecutionContext":
        # older snapshots carry no seed or version
        return cls(
            cwd=Path(data["cwd"]),
            time=datetime.fromisoformat(data["time"]),
            machine=data["machine"],
            user=data["user"],
            command=list(data["command"]),
            seed=data.get("seed"),
            version=data.get("version", ""),
        )
