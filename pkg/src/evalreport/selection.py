"""
Selection diagnostics from mask dumps against the planted negatives
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from rich.table import Table

from errors import ReportError
from synthdomains import Domain, DomainDataset
from traincore import MASK_DUMP_COLUMNS

DEFAULT_TREND_WINDOWS = 3


@dataclass
class AgentSelection:
    """Selection quality of one (domain, modality) agent"""
    domain: Domain
    modality: int
    removed: int = 0
    removed_negative: int = 0
    negative_seen: int = 0
    baseline: float = 0.0
    trend: List[Optional[float]] = field(default_factory=list)
    
    @property
    def label(self) -> str:
        return f"{'S' if self.domain == Domain.SOURCE else 'T'}{self.modality}"
    
    @property
    def precision(self) -> Optional[float]:
        return self.removed_negative / self.removed if self.removed else None
    
    @property
    def recall(self) -> Optional[float]:
        return self.removed_negative / self.negative_seen if self.negative_seen else None
    
    @property
    def final_precision(self) -> Optional[float]:
        return self.trend[-1] if self.trend else None


@dataclass
class SelectionDiagnostics:
    agents: Dict[Tuple[Domain, int], AgentSelection]
    windows: List[Tuple[int, int]]
    
    def get(self, domain: Domain, modality: int) -> Optional[AgentSelection]:
        return self.agents.get((domain, modality))
    
    def to_rich(self) -> Table:
        table = Table(title="Selection precision vs planted negatives")
        for name in ("agent", "removed", "precision", "recall", "baseline"):
            table.add_column(name, justify="right" if name != "agent" else "left")
        for start, end in self.windows:
            table.add_column(f"steps {start}-{end}", justify="right")
        for key in sorted(self.agents):
            agent = self.agents[key]
            table.add_row(
                agent.label,
                str(agent.removed),
                _fmt(agent.precision),
                _fmt(agent.recall),
                _fmt(agent.baseline),
                *[_fmt(v) for v in agent.trend],
            )
        return table


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3f}"


def read_mask_dump(path: Union[str, Path]) -> np.ndarray:
    """
    Load a mask dump as columns (step, modality, is_target, segment_id, removed)
    
    Raises:
        ReportError: file missing or not a mask dump
    """
    path = Path(path)
    if not path.exists():
        raise ReportError(f"mask dump not found: {path} (train with dump_masks: true)")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MASK_DUMP_COLUMNS:
            raise ReportError(f"{path} is not a mask dump (header {header})")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            try:
                rows.append((
                    int(row[0]),
                    int(row[1]),
                    1 if Domain(row[2]) == Domain.TARGET else 0,
                    int(row[3]),
                    int(row[4]),
                ))
            except (ValueError, IndexError) as e:
                raise ReportError(f"{path}:{line_no}: malformed row") from e
    if not rows:
        raise ReportError(f"mask dump {path} holds no rows")
    return np.array(rows, dtype=np.int64)


def trend_windows(steps: np.ndarray, num_windows: int) -> List[Tuple[int, int]]:
    """Equal-width inclusive step ranges covering [min, max]"""
    lo, hi = int(steps.min()), int(steps.max())
    edges = np.linspace(lo, hi + 1, num_windows + 1)
    bounds = np.floor(edges).astype(np.int64)
    return [(int(bounds[i]), int(bounds[i + 1]) - 1) for i in range(num_windows)]


def selection_report(
    dump: Union[str, Path],
    dataset: DomainDataset,
    num_windows: int = DEFAULT_TREND_WINDOWS,
) -> SelectionDiagnostics:
    """
    Precision and recall of each agent's removals against ``is_negative``
    
    Args:
        dump: Mask dump CSV written during training
        dataset: The dataset the run trained on
        num_windows: Number of equal step windows in the precision trend
    """
    table = read_mask_dump(dump)
    by_id = dataset.by_id()
    try:
        negative = np.array([by_id[int(i)].is_negative for i in table[:, 3]], dtype=bool)
    except KeyError as e:
        raise ReportError(f"segment {e.args[0]} in the dump is not in the dataset") from e
    
    windows = trend_windows(table[:, 0], num_windows)
    removed = table[:, 4] == 1
    agents: Dict[Tuple[Domain, int], AgentSelection] = {}
    for is_target, modality in sorted({(int(r[2]), int(r[1])) for r in table}):
        domain = Domain.TARGET if is_target else Domain.SOURCE
        rows = (table[:, 2] == is_target) & (table[:, 1] == modality)
        agent = AgentSelection(
            domain=domain,
            modality=modality,
            removed=int(np.sum(rows & removed)),
            removed_negative=int(np.sum(rows & removed & negative)),
            negative_seen=int(np.sum(rows & negative)),
            baseline=dataset.observed_negative_fraction(domain),
        )
        for start, end in windows:
            in_window = rows & removed & (table[:, 0] >= start) & (table[:, 0] <= end)
            count = int(np.sum(in_window))
            agent.trend.append(int(np.sum(in_window & negative)) / count if count else None)
        agents[(domain, modality)] = agent
    return SelectionDiagnostics(agents=agents, windows=windows)
