"""The two bundled case-study models and their simulation configs."""

from importlib import resources
from pathlib import Path

NAMES = ("berthing", "cof")


def model_path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"no bundled model {name!r}; have {', '.join(NAMES)}")
    return Path(str(resources.files(__name__).joinpath(f"{name}.tm")))


def config_path(name: str) -> Path:
    return model_path(name).with_suffix(".sim.json")


def load(name: str):
    from ..dsl import parse_file

    return parse_file(model_path(name))
