"""Bundled scenario scripts for the simulate subcommand."""

from __future__ import annotations

from importlib import resources

from ..errors import ConfigError


def builtin_scenario_names() -> list:
    root = resources.files(__name__)
    return sorted(
        entry.name[: -len(".json")]
        for entry in root.iterdir()
        if entry.name.endswith(".json")
    )


def builtin_scenario_text(name: str) -> str:
    resource = resources.files(__name__).joinpath(f"{name}.json")
    if not resource.is_file():
        raise ConfigError(
            f"no builtin scenario {name!r}; available: {', '.join(builtin_scenario_names())}"
        )
    return resource.read_text()
