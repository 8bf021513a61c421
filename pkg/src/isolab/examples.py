"""Ready-made configurations for the five catalog surfaces."""

from __future__ import annotations

from .schemas import ExperimentConfig

SURFACES = ("catenoid", "hyperboloid", "cone", "paraboloid", "sphere")


def example_configs() -> dict[str, ExperimentConfig]:
    out = {}
    for name in SURFACES:
        analyses = ["isoperimetry"] if name == "sphere" else ["isoperimetry", "parabolicity"]
        out[name] = ExperimentConfig(mode="surface", surface=name, analyses=analyses)
    return out
