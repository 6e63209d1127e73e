"""Main CLI module for the modified Dicke toolkit."""

from pathlib import Path
from typing import Dict, Optional

import typer
from rich.console import Console
from rich.table import Table

from .config import COMMANDS, RunConfig, load_run_config

app = typer.Typer(help="mdicke - exact ground states of the modified Dicke model")
console = Console(stderr=True)


def resolve_config(
    command: Optional[str],
    config_file: Optional[Path],
    n_atoms: Optional[str],
    omega: Optional[float],
    delta: Optional[float],
    lam: Optional[str],
    capital_omega: Optional[str],
    omega_prime: Optional[str],
    delta_lambda: Optional[float],
    out: Optional[Path],
    cache: Optional[Path],
    no_cache: bool,
    width: Optional[int],
    seed: Optional[int],
) -> RunConfig:
    """Merge environment, config file and flags into a RunConfig."""
    overrides: Dict[str, object] = {
        "command": command,
        "N": n_atoms,
        "omega": omega,
        "delta": delta,
        "lambda": lam,
        "Omega": capital_omega,
        "Omega-prime": omega_prime,
        "delta_lambda": delta_lambda,
        "out": out,
        "cache": cache,
        "width": width,
        "seed": seed,
    }
    config = load_run_config(config_file, overrides)
    if no_cache:
        config = config.model_copy(update={"cache_dir": None})
    return config


_COMMAND_HELP = f"One of: {', '.join(COMMANDS)}"


@app.command()
def run(
    command: Optional[str] = typer.Option(None, "--command", help=_COMMAND_HELP),
    config_file: Optional[Path] = typer.Option(None, "--config", help="Flat key=value config file"),
    n_atoms: Optional[str] = typer.Option(None, "--N", help="Atom counts: 4, 16,32,64 or start:stop:count"),
    omega: Optional[float] = typer.Option(None, "--omega", help="Cavity frequency"),
    delta: Optional[float] = typer.Option(None, "--delta", help="Qubit splitting"),
    lam: Optional[str] = typer.Option(None, "--lambda", help="Coupling grid start:stop:count"),
    capital_omega: Optional[str] = typer.Option(None, "--Omega", help="Interatomic coupling grid"),
    omega_prime: Optional[str] = typer.Option(None, "--Omega-prime", help="Grid of 2 Omega / N"),
    delta_lambda: Optional[float] = typer.Option(None, "--delta-lambda", help="Fidelity susceptibility step"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output file"),
    cache: Optional[Path] = typer.Option(None, "--cache", help="Ground-state cache directory"),
    no_cache: bool = typer.Option(False, "--no-cache", help="Disable the ground-state cache"),
    width: Optional[int] = typer.Option(None, "--width", help="Worker processes"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Lanczos start vector seed"),
):
    """Run one command (point, sweep, phase-diagram, fs-scan, scaling)."""
    try:
        config = resolve_config(command, config_file, n_atoms, omega, delta, lam, capital_omega,
                                omega_prime, delta_lambda, out, cache, no_cache, width, seed)

        from .runner import run_command

        status = run_command(config)
        if status != 0:
            raise typer.Exit(status)

    except typer.Exit:
        raise
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)


@app.command("show-config")
def show_config(
    command: Optional[str] = typer.Option(None, "--command", help=_COMMAND_HELP),
    config_file: Optional[Path] = typer.Option(None, "--config", help="Flat key=value config file"),
):
    """Display the resolved run configuration."""
    try:
        config = load_run_config(config_file, {"command": command})

        table = Table(title="Run Configuration")
        table.add_column("Setting", style="cyan")
        table.add_column("Value", style="green")

        table.add_row("Command", config.command)
        table.add_row("N", ", ".join(str(n) for n in config.n_atoms))
        table.add_row("omega", repr(config.omega))
        table.add_row("Delta", repr(config.delta))
        table.add_row("lambda", str(config.lam))
        if config.omega_prime is not None:
            table.add_row("Omega'", str(config.omega_prime))
        else:
            table.add_row("Omega", str(config.capital_omega))
        table.add_row("delta lambda", repr(config.delta_lambda))
        table.add_row("Output", str(config.out))
        table.add_row("Cache", str(config.cache_dir) if config.cache_dir else "disabled")
        table.add_row("Width", str(config.width))
        for name, value in config.solver.model_dump().items():
            table.add_row(f"solver.{name}", str(value))

        console.print(table)

    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)


if __name__ == "__main__":
    app()
