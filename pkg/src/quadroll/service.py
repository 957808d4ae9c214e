"""FastAPI service exposing the verification runs.

Three POST endpoints mirror the CLI subcommands; configs are validated by
the pydantic models (invalid ones come back as 422, which the CLI maps to
exit code 1).  Completed runs always return 200 with the report and an
exit_code field describing the verdict: 0 all checks passed, 2 tolerance
exceeded or blowups over 10% of nodes, 3 degenerate configuration.
"""

from __future__ import annotations

from fastapi import FastAPI

from . import __version__, runs
from .schemas import (ArchimedesConfig, HealthResponse, IdentitiesConfig,
                      RunResponse, TransformConfig, TransformResponse)

app = FastAPI(title="quadroll", version=__version__,
              description="Numerical verification of the Backlund "
                          "transformation for doubly ruled quadrics.")

_STATUS = {0: "ok", 1: "invalid", 2: "tolerance_exceeded", 3: "degenerate"}


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/identities", response_model=RunResponse)
def identities(config: IdentitiesConfig) -> RunResponse:
    report, code = runs.run_identities(config.model_dump())
    return RunResponse(status=_STATUS[code], exit_code=code, report=report)


@app.post("/transform", response_model=TransformResponse)
def transform(config: TransformConfig) -> TransformResponse:
    report, meshes, code = runs.run_transform(config.model_dump())
    return TransformResponse(status=_STATUS[code], exit_code=code, report=report,
                             mesh_seed_csv=meshes.get("seed", ""),
                             mesh_leaf_csv=meshes.get("leaf", ""))


@app.post("/archimedes", response_model=RunResponse)
def archimedes(config: ArchimedesConfig) -> RunResponse:
    report, code = runs.run_archimedes(config.model_dump())
    return RunResponse(status=_STATUS[code], exit_code=code, report=report)
