"""Run the quartfuse CLI with python -m quartfuse."""

from .entry_points.cli import main

main()
