import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import scipy.fft
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from . import artifacts
from .acceptance import run_acceptance
from .config import CONFIG_FILE, Config, ConfigError, get_config
from .dyadic import ProductLaw, bernstein_check, build_partition, decompose, product_law_ratio
from .errors import ChronoDeltaError
from .pipeline import run_solve
from .regularity_lab import (
    besov_halfnorm_boundedness,
    calibration_summary,
    certify_regularity,
    chgvar_check,
    cutoff_scaling,
    dilation_scaling_check,
    random_supported_charge,
    random_wavepacket,
    trace_bound_check,
)
from .signal_core import UniformGrid
from .sweeps import run_sweep

console = Console()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EXAMPLE_CONFIG = """seed: 0
threads: 1
coupling:
  kind: "synthesized"   # zero | constant | oscillating | synthesized | sampled
  nu: 0.3
  T: 4.0
initial_data:
  kind: "gaussian"
  width: 1.0
space:
  length: 40.0
  count: 4096
time:
  end: 1.2
  count: 2049
snapshots:
  end: 1.0
  count: 5
solver:
  method: "picard"
reconstruction:
  route: "fourier"
logging:
  level: "INFO"
  format: "text"
"""


class RichArgumentParser(argparse.ArgumentParser):
    """Custom ArgumentParser that uses rich for formatted error messages."""

    def error(self, message):
        """Override error method to use rich formatting."""
        if "unrecognized arguments:" in message:
            args_part = message.split("unrecognized arguments:")[1].strip()
            console.print(
                f"[bold red]✗ Error:[/bold red] Unrecognized argument: [yellow]{args_part}[/yellow]"
            )
            console.print()

            if "--" in args_part:
                typo_arg = args_part.split()[0]
                suggestions = {
                    "--confg": "--config",
                    "--conifg": "--config",
                    "--ouput": "--out",
                    "--output": "--out",
                    "--sed": "--seed",
                    "--thread": "--threads",
                    "--strcit": "--strict",
                }

                suggestion = suggestions.get(typo_arg)
                if suggestion:
                    console.print(
                        f"[bold]Did you mean:[/bold] [green]{suggestion}[/green]?"
                    )
                    console.print()
        else:
            console.print(f"[bold red]✗ Error:[/bold red] {message}")
            console.print()

        console.print("[dim]Use [cyan]--help[/cyan] to see available options[/dim]")
        self.exit(EXIT_CONFIG)

    def print_help(self, file=None):
        """Override print_help to use rich formatting."""
        if file is None:
            console.print(self.format_help())
        else:
            super().print_help(file)


def print_error(message: str, details: str = None):
    """Print a styled error message."""
    console.print(f"[bold red]✗ Error:[/bold red] {message}")
    if details:
        console.print(f"  [dim]{details}[/dim]")


def print_success(message: str):
    """Print a styled success message."""
    console.print(f"[bold green]✓[/bold green] {message}")


def print_info(message: str):
    """Print a styled info message."""
    console.print(f"[bold cyan]ℹ[/bold cyan] {message}")


def print_warning(message: str):
    """Print a styled warning message."""
    console.print(f"[bold yellow]⚠[/bold yellow] {message}")


def handle_config_error(error: ConfigError) -> int:
    """Handle configuration errors gracefully with helpful suggestions."""
    error_msg = str(error)

    print_error("Configuration Error", error_msg)
    console.print()

    if "not found" in error_msg.lower():
        console.print("[bold]Suggestions:[/bold]")
        console.print(f"  1. Create a [cyan]{CONFIG_FILE}[/cyan] file in the working directory")
        console.print("  2. Use [cyan]--config[/cyan] to point at a different file")
        console.print()
        console.print(f"[bold]Example {CONFIG_FILE}:[/bold]")
        console.print(Panel(EXAMPLE_CONFIG, border_style="cyan", title=CONFIG_FILE))
    elif "invalid yaml" in error_msg.lower():
        console.print("[bold]Suggestions:[/bold]")
        console.print("  1. Check your YAML syntax (indentation, colons, etc.)")
        console.print("  2. Use a YAML validator to identify the issue")
        console.print("  3. Compare with the example in the README")
    elif "unknown configuration key" in error_msg.lower():
        console.print("[bold]Suggestions:[/bold]")
        console.print("  1. Check the key for typos")
        console.print("  2. The README lists every section and key")

    return EXIT_CONFIG


def setup_logging(config: Config):
    settings = config.logging_config
    level = getattr(logging, settings.get("level", "INFO"))
    if settings.get("format") == "rich":
        handlers = [RichHandler(console=console, show_path=False)]
        logging.basicConfig(level=level, format="%(message)s", handlers=handlers, force=True)
    else:
        logging.basicConfig(
            level=level, format="%(asctime)s - %(levelname)s - %(message)s", force=True
        )


def _load(args) -> Config:
    config = Config(args.config) if args.config else get_config()
    return config.with_overrides(
        seed=args.seed,
        threads=args.threads,
        strict=True if args.strict else None,
        output_dir=args.out,
    )


def cmd_solve(config: Config, out_dir: Path) -> int:
    with console.status("[bold cyan]Solving for the charge...[/bold cyan]"):
        result = run_solve(config, out_dir)
    series = result.field.diagnostics
    print_success(f"Wrote {len(result.written)} artifacts to [cyan]{out_dir}[/cyan]")
    print_info(
        f"mass drift {result.field.mass_drift():.2e}, "
        f"max jump residual {np.nanmax([d.jump_residual for d in series]):.2e}, "
        f"{result.solution.method.value} residual {result.solution.residual:.2e}"
    )
    return EXIT_OK


def cmd_verify(config: Config, out_dir: Path) -> int:
    with console.status("[bold cyan]Running the acceptance suite...[/bold cyan]"):
        report = run_acceptance(config)
    artifacts.write_json_atomic(
        out_dir / "verify.json", artifacts.stamped(report.to_dict(), config.config_hash)
    )

    table = Table(title="Acceptance")
    table.add_column("#", justify="right")
    table.add_column("criterion")
    table.add_column("result")
    table.add_column("seconds", justify="right")
    for r in report.results:
        status = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(str(r.number), r.name, status, f"{r.seconds:.1f}")
    console.print(table)

    if report.passed:
        print_success("All criteria passed")
        return EXIT_OK
    failed = ", ".join(str(r.number) for r in report.failures)
    print_error(f"Failed criteria: {failed}", f"details in {out_dir / 'verify.json'}")
    return EXIT_FAILED


def cmd_sweep(config: Config, out_dir: Path) -> int:
    with console.status("[bold cyan]Sweeping resolutions...[/bold cyan]"):
        tables = run_sweep(config, out_dir)
    for quantity, rows in tables.items():
        table = Table(title=f"sweep: {quantity}")
        for column in ("resolution", "value", "order"):
            table.add_column(column, justify="right")
        for n, value, order in rows:
            table.add_row(str(n), f"{value:.3e}", "-" if np.isnan(order) else f"{order:.2f}")
        console.print(table)
    print_success(f"Sweep tables written to [cyan]{out_dir}[/cyan]")
    return EXIT_OK


def _write_summary(lemmas_dir: Path, name: str, payload: dict, config: Config) -> Path:
    return artifacts.write_json_atomic(
        lemmas_dir / f"{name}.json", artifacts.stamped(payload, config.config_hash)
    )


def cmd_lemmas(config: Config, out_dir: Path) -> int:
    lemmas = config.lemmas
    seed, samples = config.seed, lemmas["samples"]
    lemmas_dir = out_dir / "lemmas"
    written: List[Path] = []

    with console.status("[bold cyan]Running lemma batteries...[/bold cyan]"):
        for nu in lemmas["nus"]:
            report = cutoff_scaling(nu, lemmas["gaps"])
            written += artifacts.write_scaling_report(lemmas_dir, f"cutoff_nu{nu:g}", report, config.config_hash)
        for mu in lemmas["mus"]:
            report = dilation_scaling_check(None, lemmas["dilations"], mu)
            written += artifacts.write_scaling_report(lemmas_dir, f"dilation_mu{mu:g}", report, config.config_hash)
        written += artifacts.write_scaling_report(
            lemmas_dir, "besov_halfnorm", besov_halfnorm_boundedness(), config.config_hash
        )

        time_grid = UniformGrid.span(-2.0, 2.0, 257)
        chgvar = []
        for k in range(samples):
            lhs, rhs = chgvar_check(random_supported_charge(time_grid, 1.0, seed + k), 1.0, 0.25)
            chgvar.append(lhs / rhs)
        written.append(_write_summary(lemmas_dir, "chgvar", {"s": 0.25, **calibration_summary(chgvar)}, config))

        space = UniformGrid.centered(40.0, lemmas["law_count"])
        packets = [random_wavepacket(space, seed + k) for k in range(samples + 1)]
        trace = []
        for u0 in packets[:samples]:
            lhs, rhs = trace_bound_check(u0, 0.25)
            trace.append(lhs / rhs)
        written.append(_write_summary(lemmas_dir, "trace", {"nu": 0.25, **calibration_summary(trace)}, config))

        partition = build_partition(space)
        pairs = list(zip(packets[:-1], packets[1:]))
        laws = {
            "a": (ProductLaw.A, 0.25, None),
            "b": (ProductLaw.B, 0.25, None),
            "c": (ProductLaw.C, 0.3, 0.3),
            "d": (ProductLaw.D, 0.75, None),
        }
        product_laws = {
            name: calibration_summary(
                [product_law_ratio(u, v, law, s, s_prime, partition=partition) for u, v in pairs]
            )
            for name, (law, s, s_prime) in laws.items()
        }
        written.append(_write_summary(lemmas_dir, "product_laws", product_laws, config))

        f = packets[0]
        rows = []
        for q in range(4):
            for k in (0, 1, 2):
                lhs, rhs = bernstein_check(f, q, k, 2.0, "inf", partition=partition)
                rows.append((q, k, lhs, rhs, lhs / rhs if rhs > 0 else float("nan")))
        written.append(
            artifacts.write_rows_csv(
                lemmas_dir / "bernstein.csv",
                ["q", "k", "lhs", "rhs", "ratio"],
                rows,
                {"a": 2, "b": "inf", "config_hash": config.config_hash},
            )
        )

        xi = space.frequency_grid().points
        unity = partition.unity_residual(xi[np.abs(xi) <= partition.resolved_band])
        written.append(_write_summary(lemmas_dir, "unity", {"residual": unity}, config))
        written.append(
            artifacts.write_decomposition(
                lemmas_dir / "decomposition.csv", decompose(f, partition), config.config_hash
            )
        )

        coupling = config.coupling
        certificate = certify_regularity(float(coupling["nu"]), int(coupling["seed"]), float(coupling["support"]))
        written.append(_write_summary(lemmas_dir, "synthesis", certificate.to_dict(), config))

    if not certificate.certified:
        print_warning(f"Synthesized coupling not certified in H^{coupling['nu']}")
    unbounded = [name for name, summary in product_laws.items() if not summary["bounded"]]
    if unbounded:
        print_warning(f"Product law ratios spread beyond 2x the median: {', '.join(unbounded)}")

    print_success(f"Wrote {len(written)} lemma artifacts to [cyan]{lemmas_dir}[/cyan]")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "lemmas": cmd_lemmas,
}


def main(argv: Optional[List[str]] = None):
    """Main entry point for the chronodelta CLI."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help=f"Configuration file (default: ./{CONFIG_FILE}).")
    common.add_argument("--out", type=Path, default=None, help="Output directory for artifacts.")
    common.add_argument("--seed", type=int, default=None, help="Random seed.")
    common.add_argument("--threads", type=int, default=None, help="Worker threads for FFTs and sweeps.")
    common.add_argument("--strict", action="store_true", help="Turn numerical warnings into failures.")

    parser = RichArgumentParser(
        description="chronodelta: Schrödinger evolution with a time-dependent delta coupling."
    )
    subparsers = parser.add_subparsers(dest="command", required=True, help="Available commands")
    subparsers.add_parser("solve", parents=[common], help="Solve for the charge and reconstruct the field.")
    subparsers.add_parser("verify", parents=[common], help="Run the acceptance suite.")
    subparsers.add_parser("sweep", parents=[common], help="Convergence-order sweeps over resolutions.")
    subparsers.add_parser("lemmas", parents=[common], help="Run the regularity lemma batteries.")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse calls sys.exit on error, catch it to return proper exit code
        return e.code if e.code is not None else 1

    try:
        config = _load(args)
    except ConfigError as e:
        return handle_config_error(e)
    except Exception as e:
        print_error("Unexpected error loading configuration", str(e))
        return EXIT_CONFIG

    setup_logging(config)
    out_dir = config.output_dir

    try:
        with scipy.fft.set_workers(config.threads):
            return COMMANDS[args.command](config, out_dir)
    except ConfigError as e:
        return handle_config_error(e)
    except FileNotFoundError as e:
        return handle_config_error(ConfigError(f"Input file is missing: {e.filename}"))
    except ChronoDeltaError as e:
        path = artifacts.write_error(out_dir, e, config.config_hash)
        print_error(f"Numerical failure: {type(e).__name__}", str(e))
        console.print(f"  [dim]details in {path}[/dim]")
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        print_info("Operation cancelled by user")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
