"""Pydantic request/response models for the service API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class QuadricConfig(BaseModel):
    kind: Literal["hyperboloid", "paraboloid"]
    a1: float
    a2: float
    a3: Optional[float] = None

    @model_validator(mode="after")
    def _semiaxes(self):
        if self.kind == "hyperboloid":
            if self.a3 is None:
                raise ValueError("hyperboloid needs a3")
            if not (self.a2 < 0.0 < min(self.a1, self.a3)):
                raise ValueError("hyperboloid requires a2 < 0 < a1, a3")
        else:
            if self.a3 is not None:
                raise ValueError("paraboloid takes only (a1, a2)")
            if not (self.a2 < 0.0 < self.a1):
                raise ValueError("paraboloid requires a2 < 0 < a1")
        return self


class GridConfig(BaseModel):
    u0_min: float
    u0_max: float
    v0_min: float
    v0_max: float
    nu: int = Field(ge=3)
    nv: int = Field(ge=3)

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.u0_min < self.u0_max and self.v0_min < self.v0_max):
            raise ValueError("grid bounds must be increasing")
        return self


class RigidSeedConfig(BaseModel):
    R: list[list[float]]
    t: list[float]

    @field_validator("R")
    @classmethod
    def _r_shape(cls, v):
        if len(v) != 3 or any(len(row) != 3 for row in v):
            raise ValueError("R must be 3x3")
        return v

    @field_validator("t")
    @classmethod
    def _t_shape(cls, v):
        if len(v) != 3:
            raise ValueError("t must have 3 components")
        return v


class BentSeedConfig(BaseModel):
    kappa_expr: str = "0"
    sigma: Literal[1, -1] = 1
    u_ref: float = 0.0
    steps: int = Field(default=4096, ge=64)


class SeedConfig(BaseModel):
    type: Literal["trivial", "rigid", "bent"] = "trivial"
    rigid: Optional[RigidSeedConfig] = None
    bent: Optional[BentSeedConfig] = None

    @model_validator(mode="after")
    def _payload(self):
        if self.type == "rigid" and self.rigid is None:
            raise ValueError("rigid seed needs the rigid block")
        if self.type == "bent" and self.bent is None:
            raise ValueError("bent seed needs the bent block")
        return self


class RiccatiConfig(BaseModel):
    v1_init: float = 0.5
    rel_tol: float = Field(default=1e-10, gt=0)
    max_step: Optional[float] = None


class SweepConfig(BaseModel):
    samples: int = Field(default=10000, ge=1)
    rng_seed: int = Field(default=0, ge=0)


class OutputsConfig(BaseModel):
    report_path: str = "report.json"
    mesh_path: str = "mesh"


class IdentitiesConfig(BaseModel):
    quadric: QuadricConfig
    sweep: SweepConfig = SweepConfig()
    tol_scale: float = Field(default=1.0, ge=0.0)
    outputs: OutputsConfig = OutputsConfig()


class TransformConfig(BaseModel):
    quadric: QuadricConfig
    z: float
    grid: GridConfig
    seed: SeedConfig = SeedConfig()
    epsilon: Literal[1, -1] = 1
    ruling_family: Literal["m", "m'"] = "m"
    riccati: RiccatiConfig = RiccatiConfig()
    tol_scale: float = Field(default=1.0, ge=0.0)
    outputs: OutputsConfig = OutputsConfig()

    @model_validator(mode="after")
    def _z_admissible(self):
        if self.z == 0.0:
            raise ValueError("SpectralZeroError: transport undefined at z = 0")
        lo = self.quadric.a2
        hi = self.quadric.a1 if self.quadric.kind == "paraboloid" \
            else min(self.quadric.a1, self.quadric.a3)
        if not (lo < self.z < hi):
            raise ValueError(f"z must lie in ({lo}, {hi})")
        return self


class ArchimedesConfig(BaseModel):
    n: int
    tol_scale: float = Field(default=1.0, ge=0.0)
    outputs: OutputsConfig = OutputsConfig(report_path="archimedes.json")

    @field_validator("n")
    @classmethod
    def _n_min(cls, v):
        if v < 2:
            raise ValueError("n must be at least 2")
        return v


class RunResponse(BaseModel):
    status: str
    exit_code: int
    report: dict


class TransformResponse(RunResponse):
    mesh_seed_csv: str = ""
    mesh_leaf_csv: str = ""


class HealthResponse(BaseModel):
    status: str
    version: str
