"""Locate the scenario file shipped with the package."""

from importlib import resources


def scenario_path(name: str = "narrowwater-1.cfg"):
    return resources.files("asfkit") / "scenarios" / name
