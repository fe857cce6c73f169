"""Command-line front end.

Every subcommand runs in-process by default; passing --server makes the
CLI a thin client that posts the same config to a running service and
writes the returned CSV locally.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click

from .core import ConfigError
from .harness import (
    detection_csv,
    estimation_csv,
    estimation_sweep,
    parse_config,
    rate_curves,
    rates_csv,
    run_experiment,
    write_outputs,
)
from .selfcheck import format_results, selftest


def _load(config_file: str) -> str:
    return Path(config_file).read_text()


def _override_seed(text: str, seed: int | None) -> str:
    if seed is None:
        return text
    lines = [l for l in text.splitlines() if not l.split("#")[0].strip().startswith("seed")]
    lines.append(f"seed = {seed}")
    return "\n".join(lines) + "\n"


def _remote(server: str, endpoint: str, config_text: str, workers: int):
    import httpx

    resp = httpx.post(f"{server.rstrip('/')}{endpoint}",
                      json={"config": config_text, "workers": workers}, timeout=None)
    resp.raise_for_status()
    return resp.json()


@click.group()
def main():
    """Delay-Doppler link-level simulation toolkit."""


@main.command()
@click.argument("config_file")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--trials-cap", type=int, default=None, help="override the trial cap")
@click.option("--server", default=None, help="run via a remote service instead")
def run(config_file, seed, out_dir, workers, trials_cap, server):
    """Run a BER/FER detection sweep from CONFIG_FILE."""
    text = _override_seed(_load(config_file), seed)
    if trials_cap is not None:
        text += f"trials_cap = {trials_cap}\n"
    stem = Path(config_file).stem + "_run"
    if server:
        job = _remote(server, "/experiments", text, workers)
        job_id = job["job_id"]
        import httpx

        while True:
            status = httpx.get(f"{server.rstrip('/')}/experiments/{job_id}", timeout=None).json()
            if status["state"] in ("done", "failed"):
                break
            time.sleep(0.5)
        if status["state"] == "failed":
            raise click.ClickException(f"remote job failed: {status['error']}")
        csv_text = httpx.get(f"{server.rstrip('/')}/experiments/{job_id}/csv", timeout=None).text
        cfg = parse_config(text, "run")
        write_outputs(out_dir, stem, csv_text, text, cfg, 0.0)
        click.echo(csv_text, nl=False)
        return
    try:
        cfg = parse_config(text, "run")
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    start = time.perf_counter()
    records = run_experiment(cfg, workers=workers)
    csv_text = detection_csv(cfg, records)
    write_outputs(out_dir, stem, csv_text, text, cfg, time.perf_counter() - start)
    click.echo(csv_text, nl=False)


@main.command()
@click.argument("config_file")
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", default=".", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--server", default=None)
def rates(config_file, seed, out_dir, workers, server):
    """Emit achievable-rate curves (OTFS vs OFDM with/without CP)."""
    text = _override_seed(_load(config_file), seed)
    stem = Path(config_file).stem + "_rates"
    if server:
        payload = _remote(server, "/rates", text, workers)
        csv_text = payload["csv"]
        cfg = parse_config(text, "rates")
        write_outputs(out_dir, stem, csv_text, text, cfg, 0.0)
        click.echo(csv_text, nl=False)
        return
    try:
        cfg = parse_config(text, "rates")
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    start = time.perf_counter()
    rows, _ = rate_curves(cfg)
    csv_text = rates_csv(rows)
    write_outputs(out_dir, stem, csv_text, text, cfg, time.perf_counter() - start)
    click.echo(csv_text, nl=False)


@main.command()
@click.argument("config_file")
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", default=".", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--server", default=None)
def estimate(config_file, seed, out_dir, workers, server):
    """Run the embedded-pilot NMSE sweep over pilot SNR."""
    text = _override_seed(_load(config_file), seed)
    stem = Path(config_file).stem + "_estimate"
    if server:
        payload = _remote(server, "/estimate", text, workers)
        csv_text = payload["csv"]
        cfg = parse_config(text, "estimate")
        write_outputs(out_dir, stem, csv_text, text, cfg, 0.0)
        click.echo(csv_text, nl=False)
        return
    try:
        cfg = parse_config(text, "estimate")
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    start = time.perf_counter()
    rows = estimation_sweep(cfg, workers=workers)
    csv_text = estimation_csv(rows)
    write_outputs(out_dir, stem, csv_text, text, cfg, time.perf_counter() - start)
    click.echo(csv_text, nl=False)


@main.command("selftest")
def selftest_cmd():
    """Run the built-in invariant suite."""
    results = selftest()
    click.echo(format_results(results))
    if not all(ok for _, ok, _ in results):
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("otfs.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
