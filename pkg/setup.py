from setuptools import setup, find_packages

setup(
    name="quartfuse",
    version="0.dev0",
    python_requires=">=3.10",
    packages=find_packages(include=["quartfuse", "quartfuse.*"]),
    install_requires=[
        "numpy>=1.26",
        "pandas>=2.1",
        "typer>=0.12",
        "typing_extensions>=4.9",
    ],
    entry_points={"console_scripts": ["quartfuse = quartfuse.entry_points.cli:main"]},
)
