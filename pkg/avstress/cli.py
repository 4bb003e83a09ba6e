# avstress/cli.py
from __future__ import annotations

import json
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .compare import compare_runs
from .config import RunConfig
from .errors import ConfigError
from .logs import setup_logging
from .runner import ProgressFn, RunResult, execute, resolve, summary_dict, sweep, verify_run, write_run
from .version import get_version

app = typer.Typer(help="Adaptive stress testing of an autonomous vehicle at a crosswalk.", no_args_is_help=True)
console = Console()
err_console = Console(stderr=True)

EXIT_COLLISION = 0
EXIT_CONFIG = 1
EXIT_NO_COLLISION = 2


def _badparam(e: Exception | str) -> typer.BadParameter:
    return typer.BadParameter(str(e))


def _fail(e: Exception | str) -> typer.Exit:
    err_console.print(f"[bold red]error:[/bold red] {escape(str(e))}")
    return typer.Exit(code=EXIT_CONFIG)


def _run_config(
    scenario: str,
    solver: str,
    seed: int,
    budget: int,
    out: Optional[Path],
    horizon: Optional[int],
    iterations: Optional[int],
    overrides: Optional[List[str]],
) -> RunConfig:
    try:
        return RunConfig(
            scenario=scenario,
            solver=solver.lower(),
            seed=seed,
            budget=budget,
            out_dir=out,
            horizon=horizon,
            iterations=iterations,
            overrides=tuple(overrides or ()),
        )
    except ConfigError as e:
        raise _fail(e)


@contextmanager
def _progress(budget: int, label: str) -> Iterator[ProgressFn]:
    with Progress(
        TextColumn("[bold]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TextColumn("best {task.fields[best]}"),
        TimeElapsedColumn(),
        console=err_console,
        transient=True,
        disable=not err_console.is_terminal,
    ) as progress:
        task = progress.add_task(label, total=budget, best="-")

        def update(it: int, calls: int, best: Optional[float]) -> None:
            progress.update(task, completed=min(calls, budget), best="-" if best is None else f"{best:.2f}")

        yield update


def _summary_table(result: RunResult) -> Table:
    s = result.summary
    t = Table(title="Run summary", show_lines=False)
    t.add_column("Field", style="bold")
    t.add_column("Value")
    t.add_row("Scenario", s.scenario)
    t.add_row("Solver", s.solver)
    t.add_row("Seed", str(s.seed))
    t.add_row("Outcome", s.outcome.value)
    t.add_row("Calls to step", str(s.calls_to_step))
    t.add_row("First collision", "-" if s.calls_at_first_collision is None else str(s.calls_at_first_collision))
    t.add_row("Reward", f"{s.best_reward:.3f}")
    t.add_row("Reward w/o noise", f"{s.reward_without_noise:.3f}")
    t.add_row("Iterations", str(s.iterations))
    t.add_row("Wall clock (s)", f"{s.wall_clock_s:.1f}")
    return t


@app.callback(invoke_without_command=True)
def main() -> None:
    """Search for likely failure trajectories of a driving policy with MCTS or deep RL."""
    return


@app.command(help="Run one solver on one scenario and write the run directory.")
def run(
    scenario: str = typer.Option("1", "--scenario", help="Scenario id (1, 2, 3) or path to a JSON scenario config."),
    solver: str = typer.Option("mcts", "--solver", help="Solver: mcts|drl"),
    seed: int = typer.Option(0, "--seed", help="Meta-seed; every random stream is derived from it."),
    budget: int = typer.Option(2_000_000, "--budget", help="Step-call budget."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory. Defaults to runs/<run id>."),
    horizon: Optional[int] = typer.Option(None, "--horizon", help="Episode horizon in steps (also the MCTS depth)."),
    iterations: Optional[int] = typer.Option(None, "--iterations", help="MCTS iterations or DRL training iterations."),
    overrides: Optional[List[str]] = typer.Option(
        None, "--set", help="Dotted override, e.g. idm.b_max=9, mcts.c=50, drl.trpo.kl_step=0.05 (repeatable)."
    ),
    format: str = typer.Option("text", "--format", help="Output format: text|json"),
    verbose: bool = typer.Option(False, "-v", "--verbose", help="Debug logging."),
) -> None:
    fmt = format.lower()
    if fmt not in ("text", "json"):
        raise _badparam("format must be 'text' or 'json'")
    setup_logging(verbose)
    cfg = _run_config(scenario, solver, seed, budget, out, horizon, iterations, overrides)
    try:
        resolved = resolve(cfg)
    except (ConfigError, OSError) as e:
        raise _fail(e)

    with _progress(cfg.budget, f"{resolved.scenario.name} {cfg.solver}") as update:
        result = execute(cfg, resolved, progress=update)
    out_dir = write_run(result, cfg.out_dir)

    if fmt == "json":
        console.print_json(json.dumps(summary_dict(result)))
    else:
        console.print(_summary_table(result))
        console.print(f"Artifacts: {out_dir}")
    raise typer.Exit(code=EXIT_COLLISION if result.summary.collided else EXIT_NO_COLLISION)


@app.command("sweep", help="Run one solver for N consecutive seeds and aggregate the results.")
def sweep_cmd(
    runs: int = typer.Option(5, "--runs", help="Number of consecutive seeds."),
    scenario: str = typer.Option("1", "--scenario", help="Scenario id (1, 2, 3) or path to a JSON scenario config."),
    solver: str = typer.Option("mcts", "--solver", help="Solver: mcts|drl"),
    seed: int = typer.Option(0, "--seed", help="First meta-seed."),
    budget: int = typer.Option(2_000_000, "--budget", help="Step-call budget per run."),
    out: Path = typer.Option(Path("runs") / "sweep", "--out", help="Root directory; runs go to <out>/seed-<k>/."),
    horizon: Optional[int] = typer.Option(None, "--horizon", help="Episode horizon in steps."),
    iterations: Optional[int] = typer.Option(None, "--iterations", help="Iterations per run."),
    overrides: Optional[List[str]] = typer.Option(None, "--set", help="Dotted override (repeatable)."),
    verbose: bool = typer.Option(False, "-v", "--verbose", help="Debug logging."),
) -> None:
    setup_logging(verbose)
    cfg = _run_config(scenario, solver, seed, budget, out, horizon, iterations, overrides)
    try:
        with _progress(cfg.budget, f"sweep {cfg.solver}") as update:
            results, agg = sweep(cfg, runs, out, progress=lambda k, it, calls, best: update(it, calls, best))
    except (ConfigError, OSError) as e:
        raise _fail(e)

    t = Table(title=f"Sweep: {results[0].summary.scenario}, {cfg.solver}, {runs} run(s)", show_lines=False)
    t.add_column("Seed", style="bold", justify="right")
    t.add_column("Outcome")
    t.add_column("Calls to step", justify="right")
    t.add_column("First collision", justify="right")
    t.add_column("Reward", justify="right")
    for r in results:
        s = r.summary
        first = "-" if s.calls_at_first_collision is None else str(s.calls_at_first_collision)
        t.add_row(str(s.seed), s.outcome.value, str(s.calls_to_step), first, f"{s.best_reward:.3f}")
    mean = agg.mean_calls_at_first_collision
    t.add_row(
        "all",
        f"{agg.collisions}/{agg.runs} collided",
        "",
        "-" if mean is None else f"{mean:.0f} (x{agg.runs}: {agg.scaled_calls:.3g})",
        f"{agg.best_reward:.3f}",
    )
    console.print(t)
    console.print(f"Collision rate: {agg.collision_rate:.2f}")
    raise typer.Exit(code=EXIT_COLLISION if agg.collisions else EXIT_NO_COLLISION)


@app.command(help="Compare run summaries side by side (calls to step and rewards).")
def compare(
    refs: Optional[List[str]] = typer.Argument(None, help="Run directories or summary.json files (two or more)."),
    format: str = typer.Option("text", "--format", help="Output format: text|csv|json"),
    csv_out: Optional[Path] = typer.Option(None, "--csv", help="Also write the table as CSV to this path."),
) -> None:
    fmt = format.lower()
    if fmt not in ("text", "csv", "json"):
        raise _badparam("format must be one of: text, csv, json")
    try:
        code = compare_runs(refs or [], out_format=fmt, csv_path=csv_out)  # type: ignore[arg-type]
    except (ConfigError, OSError) as e:
        raise _fail(e)
    raise typer.Exit(code=code)


@app.command(help="Replay a run directory's trajectory and check the recorded rewards exactly.")
def replay(
    run_dir: Path = typer.Argument(..., help="Run directory holding summary.json and trajectory.csv."),
) -> None:
    try:
        check = verify_run(run_dir)
    except (ConfigError, OSError) as e:
        raise _fail(e)
    if check.matches:
        console.print(
            f"[bold green]Replay matches[/bold green]: {check.steps} step(s), {check.outcome.value}, "
            f"total reward {check.replayed_total:.6f}"
        )
        raise typer.Exit(code=0)
    console.print(f"[bold red]Replay mismatch[/bold red]: {escape(check.message)}")
    raise typer.Exit(code=1)


@app.command()
def version(
    verbose: bool = typer.Option(False, "-v", "--verbose", help="Show verbose version details."),
) -> None:
    console.print(get_version(verbose=verbose))


if __name__ == "__main__":
    app()
