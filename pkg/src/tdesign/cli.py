"""Command-line client for the design service.

The CLI always talks HTTP to the FastAPI app: in-process by default (no
server needed), or to a remote instance via --server.  Output files are
written client-side.

Exit codes of `run`: 0 verified optimal (or degenerate zero-criterion
problem), 1 problem-file errors, 2 extraction failure, 3 equivalence check
failed or inconclusive (design still written, marked unverified), 4 solver
failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx

from . import __version__, problems


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # no server configured: drive the ASGI app in-process through the same
    # HTTP surface a remote server would expose
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

        from .service.app import app

        return TestClient(app)


def _load_problem_text(source: str) -> str:
    path = Path(source)
    if path.exists():
        return path.read_text()
    try:
        return problems.load(source)
    except KeyError:
        raise click.ClickException(
            f"{source!r} is neither a file nor a shipped problem (shipped: {', '.join(problems.names())})"
        )


def _detail(response: httpx.Response) -> dict:
    try:
        detail = response.json().get("detail", {})
    except Exception:
        detail = {}
    if isinstance(detail, str):
        detail = {"stage": "unknown", "message": detail}
    elif isinstance(detail, list):  # pydantic validation errors
        msgs = "; ".join(f"{'.'.join(str(p) for p in e.get('loc', []))}: {e.get('msg', '')}" for e in detail)
        detail = {"stage": "request", "message": msgs}
    return detail


@click.group()
@click.version_option(__version__)
def main() -> None:
    """T-optimal discrimination designs via semidefinite moment relaxations."""


@main.command()
@click.argument("problem_source")
@click.option("--tau-max", type=int, default=None, help="cap on the relaxation order")
@click.option("--r-max", type=int, default=None, help="cap on the extraction order")
@click.option("--grid", type=int, default=None, help="verification grid points per axis")
@click.option("--seed", type=int, default=None, help="seed for extraction and grid sampling")
@click.option("--solver", type=str, default=None, help="internal or external:<command>")
@click.option("--weighted", is_flag=True, help="force weighted mode (file must carry weights)")
@click.option("--out", "out_dir", type=click.Path(), default="tdesign-out", show_default=True)
@click.option("--server", type=str, default=None, help="base URL of a remote service")
def run(problem_source, tau_max, r_max, grid, seed, solver, weighted, out_dir, server):
    """Solve a problem file (or shipped problem name) end to end."""
    text = _load_problem_text(problem_source)
    if weighted and "mode weighted" not in text:
        if "mode minmax" in text:
            text = text.replace("mode minmax", "mode weighted")
        else:
            text += "\nmode weighted\n"
    overrides = {
        k: v
        for k, v in {
            "tau_max": tau_max,
            "r_max": r_max,
            "grid": grid,
            "seed": seed,
            "solver": solver,
        }.items()
        if v is not None
    }
    with _client(server) as client:
        resp = client.post("/solve", json={"problem": text, "overrides": overrides or None})
    if resp.status_code == 422:
        return sys.exit(_fail(1, f"problem file rejected: {_detail(resp).get('message', resp.text)}"))
    if resp.status_code == 502:
        detail = _detail(resp)
        code = 2 if detail.get("stage") == "extraction" else 4
        return sys.exit(_fail(code, f"{detail.get('stage', 'solver')} failure: {detail.get('message', '')}"))
    resp.raise_for_status()
    payload = resp.json()["report"]

    from .outputs import emit_outputs

    written = emit_outputs(payload, out_dir)
    for w in payload.get("warnings", []):
        click.echo(f"warning: {w}", err=True)
    for line in payload["hierarchy"]["log_lines"]:
        click.echo(line)
    verdict = payload["equivalence"]["verdict"] if payload.get("equivalence") else "NONE"
    value = payload.get("criterion_value")
    click.echo(f"criterion value: {value}")
    if payload.get("design"):
        pts = payload["design"]["points"]
        click.echo(f"design: {len(pts)} support points (source: {payload['design_source']})")
    click.echo(f"equivalence: {verdict}")
    click.echo("wrote: " + ", ".join(str(p) for p in written))
    if payload.get("design") is None and payload.get("criterion_value") == 0.0:
        click.echo("criterion is identically zero; every design is optimal", err=True)
        return sys.exit(0)
    sys.exit(0 if verdict == "PASS" else 3)


def _fail(code: int, message: str) -> int:
    click.echo(f"error: {message}", err=True)
    return code


@main.command()
@click.argument("problem_source")
@click.option("--server", type=str, default=None)
def validate(problem_source, server):
    """Parse a problem file and echo its canonical form."""
    text = _load_problem_text(problem_source)
    with _client(server) as client:
        resp = client.post("/problems/validate", json={"problem": text})
    if resp.status_code == 422:
        return sys.exit(_fail(1, _detail(resp).get("message", resp.text)))
    resp.raise_for_status()
    body = resp.json()
    click.echo(body["canonical"], nl=False)
    sys.exit(0)


@main.command()
@click.argument("problem_source")
@click.option("--design", "design_path", type=click.Path(exists=True), required=True,
              help="design.csv with coordinates then weight per row")
@click.option("--grid", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--server", type=str, default=None)
def verify(problem_source, design_path, grid, seed, server):
    """Equivalence-check a design against a problem."""
    text = _load_problem_text(problem_source)
    points, weights = _read_design_csv(design_path)
    body = {"problem": text, "design": {"points": points, "weights": weights}}
    if grid is not None:
        body["grid"] = grid
    if seed is not None:
        body["seed"] = seed
    with _client(server) as client:
        resp = client.post("/verify", json=body)
    if resp.status_code == 422:
        return sys.exit(_fail(1, _detail(resp).get("message", resp.text)))
    resp.raise_for_status()
    out = resp.json()
    click.echo(f"criterion value: {out['criterion_value']}")
    click.echo(f"max violation: {out['max_violation']}")
    for msg in out.get("messages", []):
        click.echo(f"note: {msg}", err=True)
    click.echo(f"equivalence: {out['verdict']}")
    sys.exit(0 if out["verdict"] == "PASS" else 3)


def _read_design_csv(path: str) -> tuple[list[list[float]], list[float]]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise click.ClickException("empty design file")
    start = 1 if lines[0].lstrip()[0].isalpha() else 0
    points, weights = [], []
    for ln in lines[start:]:
        cells = [float(c) for c in ln.split(",")]
        if len(cells) < 2:
            raise click.ClickException(f"design row needs coordinates and a weight: {ln!r}")
        points.append(cells[:-1])
        weights.append(cells[-1])
    return points, weights


@main.command("problems")
@click.option("--server", type=str, default=None)
def list_problems(server):
    """List the shipped example problems."""
    with _client(server) as client:
        resp = client.get("/problems")
    resp.raise_for_status()
    for name in resp.json()["problems"]:
        click.echo(name)


@main.command()
@click.argument("name")
def show(name):
    """Print a shipped problem file."""
    try:
        click.echo(problems.load(name), nl=False)
    except KeyError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service (requires uvicorn)."""
    try:
        import uvicorn
    except ImportError:
        raise click.ClickException("uvicorn is not installed; pip install tdesign[server]")
    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
