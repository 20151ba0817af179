"""Command-line client for the laboratory service.

The CLI is a thin client: it reads the config file, posts it to the
service, writes whatever files come back, and exits with the service's
exit code. By default the request runs in-process against the bundled
application (no network, no separate process); `--server URL` sends the
identical request to a running instance instead, and the `serve`
subcommand starts one.

Exit codes: 0 success, 2 verdict failure, 1 error. Errors are printed to
stderr as single-line machine-parsable records (`error kind=... key=...
line=... message=...`).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import httpx

from .errors import ConfigError, error_record
from .runner import COMMANDS

__all__ = ["build_parser", "main"]

_COMMAND_HELP = {
    "r0": "basic reproduction number of the configured model",
    "equilibria": "disease-free and (when present) endemic equilibria",
    "simulate": "integrate the model and emit the trajectory",
    "crosscheck": "compare aggregated and infection-age integrators",
    "spectrum": "characteristic-root certificate for the endemic state",
    "lyapunov": "monotonicity verdict for the matching energy functional",
    "fit": "calibrate the susceptibility profile from samples",
    "sweep": "perturbation sweep over chronic transmission values",
    "extinction": "extinction sweep over acute transmission values",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semiflow-lab",
        description="numerical laboratory for an age-structured transmission model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=_COMMAND_HELP[name])
        cmd.add_argument("--config", required=True, help="path to the config file")
        cmd.add_argument("--out", default=None, help="output directory (overrides [io] out_dir)")
        cmd.add_argument("--eps", default=None, help="comma-separated sweep epsilon list override")
        cmd.add_argument("--horizon", type=float, default=None, help="time horizon override")
        cmd.add_argument("--server", default=None, help="base URL of a running service (default: in-process)")
    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _parse_eps(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(
            f"cannot parse --eps value {text!r} as a float list", key="eps"
        ) from exc


def _detail_record(detail) -> str:
    """Render a service error detail as a single-line record."""
    if not isinstance(detail, dict):
        return f"error kind=unexpected message={detail}"
    parts = [f"error kind={detail.get('kind', 'unexpected')}"]
    if detail.get("key") is not None:
        parts.append(f"key={detail['key']}")
    if detail.get("line") is not None:
        parts.append(f"line={detail['line']}")
    parts.append(f"message={detail.get('message', '')}")
    return " ".join(parts)


def _post(server: str | None, command: str, payload: dict) -> httpx.Response:
    """Send the request over HTTP, or in-process when no server is given."""
    if server is not None:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(f"/run/{command}", json=payload)

    import asyncio

    from .service import app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://semiflow-lab", timeout=None
        ) as client:
            return await client.post(f"/run/{command}", json=payload)

    return asyncio.run(go())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    try:
        config_text = Path(args.config).read_text()
        payload: dict = {"config_text": config_text}
        if args.eps is not None:
            payload["eps"] = _parse_eps(args.eps)
        if args.horizon is not None:
            payload["horizon"] = args.horizon
    except OSError as exc:
        print(f"error kind=io message={exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(exc.record(), file=sys.stderr)
        return 1

    try:
        response = _post(args.server, args.command, payload)
    except httpx.HTTPError as exc:
        print(f"error kind=transport message={exc}", file=sys.stderr)
        return 1

    if response.status_code != 200:
        try:
            detail = response.json().get("detail")
        except ValueError:
            detail = response.text
        print(_detail_record(detail), file=sys.stderr)
        return 1

    body = response.json()
    out_dir = args.out if args.out is not None else body["out_dir"]
    try:
        base = Path(out_dir)
        base.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(body["files"]):
            path = base / name
            path.write_text(body["files"][name], newline="")
            written.append(str(path))
    except OSError as exc:
        print(f"error kind=io message={exc}", file=sys.stderr)
        return 1

    exit_code = int(body["exit_code"])
    if exit_code == 0:
        print(f"{args.command}: ok, wrote {', '.join(written)}")
    else:
        failing = sorted(
            name
            for name, value in body["summary"].get("verdicts", {}).items()
            if not value
        )
        print(
            f"{args.command}: verdict failure ({', '.join(failing)}), "
            f"wrote {', '.join(written)}"
        )
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
