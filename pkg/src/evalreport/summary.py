"""
Comparison table over run summaries
"""
import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from errors import ReportError
from traincore import RunSummary, find_summaries
from utils.logger import get_logger

logger = get_logger()


REPORT_COLUMNS = ["mode", "scenario", "mean_acc", "std_acc", "n_seeds"]
MEAN_COLUMN = "mean"


@dataclass(frozen=True)
class Cell:
    mean: float
    std: float
    n_seeds: int
    
    @classmethod
    def from_values(cls, values: List[float]) -> "Cell":
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return cls(float(np.mean(values)), std, len(values))


@dataclass
class ComparisonTable:
    """Rows are run variants, columns are scenarios plus their mean"""
    rows: List[str]
    scenarios: List[str]
    cells: Dict[Tuple[str, str], Cell] = field(default_factory=dict)
    
    def get(self, row: str, scenario: str) -> Optional[Cell]:
        return self.cells.get((row, scenario))
    
    def row_mean(self, row: str) -> Optional[float]:
        present = [c.mean for s in self.scenarios if (c := self.get(row, s)) is not None]
        return float(np.mean(present)) if present else None
    
    def records(self) -> List[List]:
        """Report CSV records; gaps are omitted"""
        out = []
        for row in self.rows:
            for scenario in self.scenarios:
                cell = self.get(row, scenario)
                if cell is not None:
                    out.append([row, scenario, cell.mean, cell.std, cell.n_seeds])
        return out
    
    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for record in self.records():
                writer.writerow([record[0], record[1], repr(record[2]), repr(record[3]), record[4]])
        return path
    
    def to_rich(self, title: str = "Target top-1 accuracy") -> Table:
        table = Table(title=title)
        table.add_column("mode", style="cyan")
        for scenario in self.scenarios:
            table.add_column(scenario, justify="right")
        table.add_column(MEAN_COLUMN, justify="right", style="bold")
        for row in self.rows:
            values = []
            for scenario in self.scenarios:
                cell = self.get(row, scenario)
                values.append("-" if cell is None else f"{100 * cell.mean:.1f} ± {100 * cell.std:.1f}")
            mean = self.row_mean(row)
            values.append("-" if mean is None else f"{100 * mean:.1f}")
            table.add_row(row, *values)
        return table
    
    def to_text(self) -> str:
        """Aligned plain-text rendering"""
        console = Console(record=True, file=io.StringIO(), width=160, color_system=None)
        console.print(self.to_rich())
        return console.export_text()


def load_summaries(paths: Iterable[Union[str, Path]]) -> List[RunSummary]:
    summaries = []
    for path in paths:
        try:
            summaries.append(RunSummary.model_validate_json(Path(path).read_text(encoding="utf-8")))
        except (OSError, ValidationError) as e:
            raise ReportError(f"unreadable run summary {path}: {e}") from e
    return summaries


def build_table(summaries: Iterable[RunSummary]) -> ComparisonTable:
    grouped: Dict[Tuple[str, str], List[float]] = {}
    rows: List[str] = []
    scenarios: List[str] = []
    for summary in summaries:
        if summary.variant not in rows:
            rows.append(summary.variant)
        if summary.scenario not in scenarios:
            scenarios.append(summary.scenario)
        grouped.setdefault((summary.variant, summary.scenario), []).append(summary.final_accuracy)
    table = ComparisonTable(rows=rows, scenarios=sorted(scenarios))
    table.cells = {key: Cell.from_values(values) for key, values in grouped.items()}
    
    missing = [(r, s) for r in table.rows for s in table.scenarios if (r, s) not in table.cells]
    if missing:
        logger.warning(f"comparison table has {len(missing)} gaps, e.g. {missing[0]}")
    return table


def summarize(runs: Union[str, Path, Iterable[Union[str, Path]]]) -> ComparisonTable:
    """
    Aggregate run summaries into a variant x scenario table of mean ± std
    
    Args:
        runs: A runs directory (searched recursively) or explicit summary files
        
    Raises:
        ReportError: no run summaries found
    """
    paths = find_summaries(runs) if isinstance(runs, (str, Path)) else [Path(p) for p in runs]
    if not paths:
        raise ReportError(f"no run summaries under {runs}")
    return build_table(load_summaries(paths))
