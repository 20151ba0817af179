"""HTTP service exposing command execution.

The service is stateless and never touches the filesystem: requests carry
the full config text, responses carry every rendered output file as a
string. Clients (the bundled CLI, scripts, CI jobs) decide where files
land. Endpoints:

  - GET  /health            liveness probe
  - POST /run/{command}     execute one command against a config

Unknown commands return 404; config and domain failures return 422 with a
structured detail object (kind, message, and the offending key and line
when known); verdict failures are not HTTP errors, they come back as a
normal response with exit_code 2.
"""

from __future__ import annotations

from dataclasses import replace

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import parse_config
from .errors import ConfigError, SemiflowError, error_kind
from .runner import COMMANDS, run_command

__all__ = ["RunRequest", "RunResponse", "create_app", "app"]


class RunRequest(BaseModel):
    """One command execution request.

    `eps` and `horizon`, when given, override the config's sweep list and
    time horizon without editing the config text.
    """

    config_text: str = Field(description="full config file content")
    eps: list[float] | None = Field(
        default=None, description="override for the sweep epsilon list"
    )
    horizon: float | None = Field(
        default=None, description="override for the simulation horizon"
    )


class RunResponse(BaseModel):
    """Outcome of one command execution."""

    command: str
    exit_code: int
    summary: dict
    files: dict[str, str]
    out_dir: str = Field(description="directory the config asks outputs to land in")


def _error_detail(exc: Exception) -> dict:
    detail = {"kind": error_kind(exc), "message": str(exc)}
    if isinstance(exc, ConfigError):
        detail["key"] = exc.key
        detail["line"] = exc.line
    return detail


def create_app() -> FastAPI:
    app = FastAPI(
        title="semiflow-lab",
        description="age-structured transmission model laboratory",
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/run/{command}", response_model=RunResponse)
    def run(command: str, request: RunRequest) -> RunResponse:
        if command not in COMMANDS:
            raise HTTPException(
                status_code=404,
                detail={
                    "kind": "config",
                    "message": f"unknown command {command!r} "
                    f"(expected one of {', '.join(COMMANDS)})",
                },
            )
        try:
            cfg = parse_config(request.config_text)
            if request.eps is not None:
                cfg = replace(cfg, eps_list=tuple(request.eps))
            if request.horizon is not None:
                if not (request.horizon > 0.0):
                    raise ConfigError(
                        f"horizon must be positive, got {request.horizon!r}",
                        key="horizon",
                    )
                cfg = replace(cfg, horizon=float(request.horizon))
            result = run_command(command, cfg)
        except SemiflowError as exc:
            raise HTTPException(status_code=422, detail=_error_detail(exc)) from exc
        return RunResponse(
            command=result.command,
            exit_code=result.exit_code,
            summary=result.summary,
            files=result.files,
            out_dir=cfg.out_dir,
        )

    return app


app = create_app()
