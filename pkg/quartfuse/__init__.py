"""Query-conditioned cross-modal token gating on synthetic video, audio and sensor streams."""

__version__ = "0.dev0"

from .entry_points.python_api import *
# Pass on everything from the Python API entry point
