"""Command-line entry points for running and inspecting experiments."""

from __future__ import annotations

import json
import os
import sys

import click

from .bridge import DivergenceError, ProtocolError, serve_socket, spawn_agent, write_episode_log
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    profitability_thresholds,
    run_depletion_scenario,
    run_experiment,
    sweep as run_sweep,
)
from .metrics import read_trace_csv, validate_trace
from .model import ConsistencyError, FeeSchedule

_FAILURES = (ConfigError, ConsistencyError, ProtocolError, DivergenceError, ValueError, OSError)


def _parse_seeds(seed: int | None, seeds: str | None) -> list[int] | None:
    if seed is not None and seeds is not None:
        raise click.UsageError("use either --seed or --seeds, not both")
    if seed is not None:
        return [seed]
    if seeds is None:
        return None
    if ".." in seeds:
        lo, hi = seeds.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in seeds.split(",") if part]


def _load(config_path: str, seed: int | None, seeds: str | None) -> ExperimentConfig:
    config = load_config(config_path)
    chosen = _parse_seeds(seed, seeds)
    if chosen is not None:
        config.seeds = chosen
    return config


@click.group()
def main() -> None:
    """Payment-channel relay node simulator."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Run a single seed.")
@click.option("--seeds", default=None, help="Seed list '0,1,2' or range '0..9'.")
@click.option("--out", "out_dir", default=None, type=click.Path(), help="Trace/summary directory.")
@click.option("--policy", "policy_override", default=None, help="Override the configured policy.")
def run(config_path, seed, seeds, out_dir, policy_override) -> None:
    """Run the experiment once per seed and summarize final fortunes."""
    try:
        config = _load(config_path, seed, seeds)
        out_dir = out_dir or config.out_dir
        _, summary = run_experiment(config, out_dir, policy_override)
    except _FAILURES as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--param", default=None, help="Dotted config path, e.g. fees.relay_prop.")
@click.option("--values", default=None, help="Comma-separated values, e.g. 0.001,0.005,0.01.")
@click.option("--seed", type=int, default=None)
@click.option("--seeds", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--policy", "policy_override", default=None)
def sweep(config_path, param, values, seed, seeds, out_dir, policy_override) -> None:
    """Rerun the experiment over a grid of one parameter's values."""
    try:
        config = _load(config_path, seed, seeds)
        out_dir = out_dir or config.out_dir
        if param is None or values is None:
            if not config.sweep:
                raise click.UsageError("give --param/--values or a sweep: block in the config")
            param = param or config.sweep["param"]
            grid = config.sweep["values"] if values is None else _parse_values(values)
        else:
            grid = _parse_values(values)
        table = run_sweep(config, param, grid, out_dir, policy_override)
    except _FAILURES as exc:
        raise click.ClickException(str(exc))
    for row in table:
        click.echo(
            f"{param}={row['value']}: mean={row['mean']!r} min={row['min']!r} max={row['max']!r}"
        )


def _parse_values(text: str) -> list:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(int(part))
        except ValueError:
            try:
                values.append(float(part))
            except ValueError:
                values.append(part)
    return values


@main.command("validate-trace")
@click.argument("traces", nargs=-1, required=True, type=click.Path(exists=True))
def validate_trace_cmd(traces) -> None:
    """Re-check the conservation identities inside trace CSV files."""
    failed = False
    for path in traces:
        try:
            problems = validate_trace(read_trace_csv(path))
        except _FAILURES as exc:
            raise click.ClickException(f"{path}: {exc}")
        if problems:
            failed = True
            click.echo(f"{path}: {len(problems)} problem(s)")
            for problem in problems:
                click.echo(f"  {problem}")
        else:
            click.echo(f"{path}: ok")
    if failed:
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--relay-prop", type=float, default=None)
@click.option("--swap-rate", type=float, default=None)
@click.option("--swap-flat", type=float, default=None)
def thresholds(config_path, relay_prop, swap_rate, swap_flat) -> None:
    """Print the minimum profitable swap amounts for a fee schedule."""
    try:
        if config_path is not None:
            fees = load_config(config_path).fees
        else:
            if None in (relay_prop, swap_rate, swap_flat):
                raise click.UsageError("give --config or all of --relay-prop/--swap-rate/--swap-flat")
            fees = FeeSchedule(0.0, relay_prop, swap_rate, swap_flat)
        result = profitability_thresholds(fees)
    except _FAILURES as exc:
        raise click.ClickException(str(exc))
    click.echo(
        json.dumps(
            {
                "swap_in": "infeasible" if result.swap_in is None else result.swap_in,
                "swap_out": "infeasible" if result.swap_out is None else result.swap_out,
            },
            indent=2,
        )
    )


@main.command("scenario-appendix-a")
@click.option("--relay-prop", type=float, default=0.5, show_default=True)
@click.option("--transactions", type=int, default=100, show_default=True)
@click.option("--amount", type=float, default=20.0, show_default=True)
@click.option("--capacity", type=float, default=40.0, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
def scenario_appendix_a(relay_prop, transactions, amount, capacity, out_dir) -> None:
    """Alternating symmetric demand that starves the channels through fees."""
    try:
        report = run_depletion_scenario(relay_prop, transactions, amount, capacity)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            report.trace.write_csv(os.path.join(out_dir, "trace_symmetric_depletion.csv"))
    except _FAILURES as exc:
        raise click.ClickException(str(exc))
    click.echo(f"transactions: {len(report.transactions)}")
    click.echo(f"successes:    {report.successes}")
    if report.stuck:
        click.echo(f"permanently stuck after transaction {report.stuck_after}")
    else:
        click.echo("never stuck")


@main.command("serve-agent")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--agent-cmd", default=None, help="Command to spawn; speaks the protocol on stdio.")
@click.option("--listen", default=None, help="host:port to accept one agent over a local socket.")
@click.option("--seed", type=int, default=None)
@click.option("--seeds", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--timeout", type=float, default=60.0, show_default=True, help="Seconds to wait per act.")
@click.option("--max-episodes", type=int, default=None)
def serve_agent(config_path, agent_cmd, listen, seed, seeds, out_dir, timeout, max_episodes) -> None:
    """Expose the simulation to an external learning agent."""
    if (agent_cmd is None) == (listen is None):
        raise click.UsageError("give exactly one of --agent-cmd or --listen")
    try:
        config = _load(config_path, seed, seeds)
        out_dir = out_dir or config.out_dir
        if agent_cmd is not None:
            episodes = spawn_agent(config, agent_cmd, timeout=timeout, max_episodes=max_episodes)
        else:
            host, port = listen.rsplit(":", 1)
            episodes = serve_socket(
                config, host or "127.0.0.1", int(port), timeout=timeout, max_episodes=max_episodes
            )
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            for index, (trace, log) in enumerate(episodes):
                seed_used = trace.meta["seed"]
                trace.write_csv(os.path.join(out_dir, f"trace_ep{index}_seed{seed_used}.csv"))
                write_episode_log(os.path.join(out_dir, f"episode_ep{index}_seed{seed_used}.jsonl"), log)
    except _FAILURES as exc:
        raise click.ClickException(str(exc))
    for index, (trace, _) in enumerate(episodes):
        click.echo(
            f"episode {index}: seed={trace.meta['seed']} steps={len(trace.rows) - 1} "
            f"final_fortune={trace.final_fortune!r}"
        )


if __name__ == "__main__":
    main()
