"""Bundled fixture taxonomy, demo scenes and benchmark settings."""

from importlib import resources


def path(name: str):
    return resources.files(__name__) / name
