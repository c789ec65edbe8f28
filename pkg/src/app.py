"""
mmir - command-line entry point
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from config import DATA_DIR, LOG_FILE, RUNS_DIR
from errors import ConfigError, MMIRError, TrainingAbortedError
from evalreport import selection_report, summarize
from synthdomains import (
    DEFAULT_SCENARIO,
    Domain,
    DomainDataset,
    generate,
    load_dataset,
    load_spec,
    save_dataset,
    spec_for_scenario,
)
from traincore import RunMode, TrainConfig, load_config, run_ablation_suite, run_training
from utils.logger import get_logger, set_console_level

logger = get_logger()

console = Console()


def _parse_seeds(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmir", description="Multi-modal instance refinement on synthetic domains")
    parser.add_argument("--debug", action="store_true", help="show INFO logs on the console")
    commands = parser.add_subparsers(dest="command", required=True)
    
    gen = commands.add_parser("gen-data", help="generate a synthetic source/target dataset")
    gen.add_argument("--out", type=Path, default=DATA_DIR)
    gen.add_argument("--scenario", default=None, help=f"scenario name (default: {DEFAULT_SCENARIO})")
    gen.add_argument("--spec", type=Path, default=None, help="YAML/JSON DomainSpec file")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--negative-fraction", type=float, default=None)
    gen.add_argument("--encoding", choices=["text", "binary"], default="text")
    
    train = commands.add_parser("train", help="run one training configuration")
    train.add_argument("--config", type=Path, default=None)
    train.add_argument("--mode", choices=[m.value for m in RunMode], default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--data", type=Path, default=None, help="dataset directory (generated from the scenario if absent)")
    train.add_argument("--out", type=Path, default=None)
    
    ablate = commands.add_parser("ablate", help="run the ablation suite over several seeds")
    ablate.add_argument("--config", type=Path, default=None)
    ablate.add_argument("--seeds", type=_parse_seeds, required=True)
    ablate.add_argument("--data", type=Path, default=None)
    ablate.add_argument("--out", type=Path, default=None)
    ablate.add_argument("--workers", type=int, default=1)
    ablate.add_argument("--variants", default=None, help="comma-separated subset of variants")
    
    report = commands.add_parser("report", help="aggregate run summaries into a comparison table")
    report.add_argument("--runs", type=Path, default=RUNS_DIR)
    report.add_argument("--csv", type=Path, default=None)
    
    selection = commands.add_parser("selection-report", help="selection precision from a mask dump")
    selection.add_argument("--dump", type=Path, required=True)
    selection.add_argument("--data", type=Path, required=True)
    selection.add_argument("--windows", type=int, default=3)
    return parser


def _dataset_for(config: TrainConfig, data: Optional[Path]) -> DomainDataset:
    if data is not None:
        return load_dataset(data)
    logger.info(f"No --data given, generating scenario '{config.scenario}'")
    return generate(spec_for_scenario(config.scenario))


def cmd_gen_data(args) -> int:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.negative_fraction is not None:
        updates["source_negative_fraction"] = args.negative_fraction
        updates["target_negative_fraction"] = args.negative_fraction
    if args.spec is not None:
        if args.scenario is not None:
            raise ConfigError("--spec and --scenario are exclusive")
        spec = load_spec(args.spec)
    else:
        spec = spec_for_scenario(args.scenario or DEFAULT_SCENARIO)
    if updates:
        spec = spec.model_validate({**spec.model_dump(), **updates})
    dataset = generate(spec)
    path = save_dataset(dataset, args.out, encoding=args.encoding)
    console.print(
        f"[green]Dataset written:[/green] {path} "
        f"({len(dataset.source)} source / {len(dataset.target)} target / {len(dataset.target_test)} test, "
        f"negatives {dataset.negative_count(Domain.SOURCE)} / {dataset.negative_count(Domain.TARGET)})"
    )
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config, mode=args.mode, seed=args.seed)
    dataset = _dataset_for(config, args.data)
    out = args.out or RUNS_DIR / config.scenario / config.mode.value / f"seed{config.seed}"
    with console.status(f"[cyan]Training {config.mode.value} (seed {config.seed})...", spinner="line"):
        summary = run_training(config, dataset, out)
    console.print(f"[green]Final target top-1:[/green] {100 * summary.final_accuracy:.2f}%  [dim]({out})[/dim]")
    return 0


def cmd_ablate(args) -> int:
    config = load_config(args.config)
    dataset = _dataset_for(config, args.data)
    out = args.out or RUNS_DIR / "ablation" / config.scenario
    variants = [v.strip() for v in args.variants.split(",")] if args.variants else None
    with console.status(f"[cyan]Ablation over seeds {args.seeds}...", spinner="line"):
        rows = run_ablation_suite(config, dataset, args.seeds, out, workers=args.workers, variants=variants)
    
    table = Table(title=f"Ablation ({config.scenario}, {len(args.seeds)} seeds)")
    table.add_column("variant", style="cyan")
    table.add_column("mean top-1", justify="right")
    table.add_column("std", justify="right")
    table.add_column("n", justify="right")
    for row in rows:
        table.add_row(row.variant, f"{100 * row.mean:.2f}", f"{100 * row.std:.2f}", str(row.n_seeds))
    console.print(table)
    return 0


def cmd_report(args) -> int:
    table = summarize(args.runs)
    console.print(table.to_rich())
    if args.csv is not None:
        path = table.write_csv(args.csv)
        console.print(f"[dim]CSV written: {path}[/dim]")
    return 0


def cmd_selection_report(args) -> int:
    dataset = load_dataset(args.data)
    diagnostics = selection_report(args.dump, dataset, num_windows=args.windows)
    console.print(diagnostics.to_rich())
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "ablate": cmd_ablate,
    "report": cmd_report,
    "selection-report": cmd_selection_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point"""
    args = build_parser().parse_args(argv)
    if args.debug:
        set_console_level("INFO")
    
    try:
        return COMMANDS[args.command](args)
    except TrainingAbortedError as e:
        logger.error(f"Training aborted: {e}")
        console.print(f"[red]Training aborted: {e}[/red]")
        if e.checkpoint_path:
            console.print(f"[dim]Last good checkpoint: {e.checkpoint_path}[/dim]")
        return 1
    except MMIRError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[red]Error: {e}[/red]")
        if args.debug:
            console.print(f"[dim]Log file: {LOG_FILE}[/dim]")
        return 1
    except ValidationError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[red]Invalid parameters: {e}[/red]")
        return 1
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        return 130


if __name__ == "__main__":
    sys.exit(main())
