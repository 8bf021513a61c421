"""Experiment configuration and report models shared by the CLI and the HTTP service."""

from __future__ import annotations

import math
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .parabolicity import AdmissibilityError, check_admissible
from .radial_fn import ParseError, parse_radial

SCHEMA_VERSION = 1

AnalysisKind = Literal["isoperimetry", "volume", "exit-time", "capacity", "parabolicity", "balance"]
FIELD_TESTS = ("sphere", "ball", "log-ball", "threshold")
SURFACE_TESTS = ("milnor", "ichihara", "tangency")
SURFACE_ANALYSES = ("isoperimetry", "parabolicity")


class AnalysisSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: AnalysisKind
    rho: float | None = Field(default=None, gt=0.0)
    tests: list[str] | None = None

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, data: Any) -> Any:
        return {"kind": data} if isinstance(data, str) else data

    @model_validator(mode="after")
    def _check(self) -> "AnalysisSpec":
        if self.kind == "capacity" and self.rho is None:
            raise ValueError("capacity needs an inner radius rho")
        if self.tests is not None:
            if self.kind != "parabolicity":
                raise ValueError(f"tests only apply to parabolicity, not {self.kind}")
            unknown = sorted(set(self.tests) - set(FIELD_TESTS + SURFACE_TESTS))
            if unknown:
                raise ValueError(f"unknown parabolicity tests {unknown}; known: {list(FIELD_TESTS + SURFACE_TESTS)}")
        return self


class NumericsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol: float = Field(default=1e-10, gt=0.0, lt=1e-3)
    grid: int = Field(default=64, ge=16, le=100000)
    horizon: float = Field(default=16.0, gt=1.0)
    doublings: int = Field(default=14, ge=4, le=40)
    decay_ratio: float = Field(default=0.5, gt=0.0, lt=1.0)
    n_nodes: int = Field(default=2048, ge=16, le=1 << 20)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    v0: bool = True  # multiply volumes and capacities by the unit sphere volume


def _check_text(text: str | None, variable: str, name: str) -> str | None:
    if text is None:
        return None
    try:
        parse_radial(text, variable)
    except ParseError as exc:
        raise ValueError(f"{name}: {exc}") from exc
    return text


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    mode: Literal["constellation", "surface", "space-form"]
    w: str | None = None
    g: str | None = None
    h: str | None = None
    x: str | None = None
    z: str | None = None
    surface: str | None = None  # catalog name: catenoid, hyperboloid, cone, paraboloid, sphere
    m: int | None = Field(default=None, ge=2)
    R: float | None = Field(default=None, gt=0.0)
    b: float | None = None
    C: float | None = None
    a: float | None = Field(default=None, ge=0.0)
    u_max: float | None = Field(default=None, gt=0.0)
    theta: float = Field(default=math.pi / 4, gt=0.0, lt=math.pi / 2)
    alpha: float = Field(default=1.0, gt=0.0)
    analyses: list[AnalysisSpec] = Field(min_length=1)
    numerics: NumericsConfig = NumericsConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        for name in ("w", "g", "h"):
            _check_text(getattr(self, name), "r", name)
        for name in ("x", "z"):
            _check_text(getattr(self, name), "u", name)
        if self.mode == "constellation":
            missing = [k for k in ("w", "g", "h", "m", "R") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"constellation mode needs {missing}")
        elif self.mode == "space-form":
            missing = [k for k in ("b", "m", "R") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"space-form mode needs {missing}")
            if self.b > 0.0 and self.R >= math.pi / math.sqrt(self.b):
                raise ValueError(f"R must stay below the conjugate radius pi/sqrt(b) = {math.pi / math.sqrt(self.b):.12g}")
            if self.C is not None and self.b < 0.0:
                try:
                    check_admissible(self.m, self.b, self.C)
                except AdmissibilityError as exc:
                    raise ValueError(str(exc)) from exc
            if self.C is not None and self.b == 0.0 and self.C != 0.0:
                raise ValueError("in flat space the convexity bound C must be 0 (admissibility forces C -> 0 as b -> 0)")
        else:
            if self.surface is None and (self.x is None or self.z is None or self.a is None):
                raise ValueError("surface mode needs a catalog name or the profile x, z and disc radius a")
            bad = [a.kind for a in self.analyses if a.kind not in SURFACE_ANALYSES]
            if bad:
                raise ValueError(f"surface mode supports {list(SURFACE_ANALYSES)}, got {bad}")
        for spec in self.analyses:
            if spec.tests is None:
                continue
            allowed = SURFACE_TESTS if self.mode == "surface" else FIELD_TESTS
            wrong = [t for t in spec.tests if t not in allowed]
            if wrong:
                raise ValueError(f"tests {wrong} do not apply in {self.mode} mode; use {list(allowed)}")
        return self

    @field_validator("surface")
    @classmethod
    def _known_surface(cls, v: str | None) -> str | None:
        names = ("catenoid", "hyperboloid", "cone", "paraboloid", "sphere")
        if v is not None and v not in names:
            raise ValueError(f"unknown surface {v!r}; catalog: {list(names)}")
        return v


class AnalysisReport(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    analysis: str
    mode: str
    config: dict[str, Any]
    numerics: NumericsConfig
    result: dict[str, Any]


class CsvTable(BaseModel):
    header: list[str]
    rows: list[list[Any]]


class RunResponse(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    exit_code: int
    error: str | None = None
    reports: dict[str, AnalysisReport] = {}
    tables: dict[str, CsvTable] = {}
