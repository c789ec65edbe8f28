"""
Run metrics and where they are stored
"""
import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from config import MASK_DUMP_FILE, METRICS_FILE, SUMMARY_FILE
from errors import ContractViolationError, ReportError, UndefinedMetricError
from traincore.schemas import RunSummary
from utils.logger import get_logger

logger = get_logger()


MASK_DUMP_COLUMNS = ["step", "modality", "domain", "segment_id", "removed_flag", "relevance", "reward"]


def _cell(value) -> str:
    # repr round-trips float64 exactly, so identical runs give identical files
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


@dataclass
class StepRecord:
    step: int
    stage: int
    lr: float
    loss_cls: float
    loss_adv: Optional[float] = None
    loss_dqn: Optional[float] = None
    kept: List[int] = field(default_factory=list)
    rewards: Dict[str, float] = field(default_factory=dict)


@dataclass
class EvalRecord:
    step: int
    accuracy: float
    precision: Dict[str, Optional[float]] = field(default_factory=dict)
    recall: Dict[str, Optional[float]] = field(default_factory=dict)


class RunMetrics:
    """Step-level losses plus periodic target evaluations"""
    
    def __init__(self, agent_labels: Sequence[str] = (), num_modalities: int = 0):
        self.agent_labels = list(agent_labels)
        self.num_modalities = num_modalities
        self.steps: List[StepRecord] = []
        self.evaluations: List[EvalRecord] = []
    
    def record_step(self, record: StepRecord):
        if self.steps and record.step <= self.steps[-1].step:
            raise ContractViolationError(f"step index went from {self.steps[-1].step} to {record.step}")
        scalars = [record.lr, record.loss_cls, record.loss_adv, record.loss_dqn, *record.rewards.values()]
        if any(v is not None and not math.isfinite(v) for v in scalars):
            raise ContractViolationError(f"non-finite metric at step {record.step}")
        self.steps.append(record)
    
    def record_evaluation(self, record: EvalRecord):
        if not math.isfinite(record.accuracy):
            raise ContractViolationError(f"non-finite accuracy at step {record.step}")
        self.evaluations.append(record)
    
    @property
    def last_step(self) -> int:
        return self.steps[-1].step if self.steps else 0
    
    def accuracies(self) -> List[float]:
        return [e.accuracy for e in self.evaluations]
    
    def final_accuracy(self, last_m: int) -> float:
        """
        Mean target accuracy over the last ``last_m`` evaluations
        
        Raises:
            UndefinedMetricError: no evaluation was recorded
        """
        if not self.evaluations:
            raise UndefinedMetricError("no evaluations recorded")
        return float(np.mean(self.accuracies()[-last_m:]))
    
    def header(self) -> List[str]:
        columns = ["step", "stage", "lr", "loss_cls", "loss_adv", "loss_dqn"]
        columns += [f"kept_m{k}" for k in range(self.num_modalities)]
        columns += [f"reward_{label}" for label in self.agent_labels]
        columns += ["accuracy"]
        columns += [f"precision_{label}" for label in self.agent_labels]
        columns += [f"recall_{label}" for label in self.agent_labels]
        return columns
    
    def rows(self) -> List[List[str]]:
        evaluations = {e.step: e for e in self.evaluations}
        rows = []
        for record in self.steps:
            row = [record.step, record.stage, record.lr, record.loss_cls, record.loss_adv, record.loss_dqn]
            row += [record.kept[k] if k < len(record.kept) else None for k in range(self.num_modalities)]
            row += [record.rewards.get(label) for label in self.agent_labels]
            evaluation = evaluations.get(record.step)
            row.append(None if evaluation is None else evaluation.accuracy)
            for table in ("precision", "recall"):
                values = {} if evaluation is None else getattr(evaluation, table)
                row += [values.get(label) for label in self.agent_labels]
            rows.append([_cell(v) for v in row])
        return rows


class MetricsRepository(ABC):
    """Abstract storage for the artifacts of one run"""
    
    @abstractmethod
    def save_metrics(self, metrics: RunMetrics) -> Path:
        """Persist step-level metrics"""
        pass
    
    @abstractmethod
    def save_summary(self, summary: RunSummary) -> Path:
        """Persist the final summary"""
        pass
    
    @abstractmethod
    def append_mask_rows(self, rows: Iterable[Sequence]) -> int:
        """Append selection-mask dump rows, returning how many were written"""
        pass
    
    @abstractmethod
    def load_summary(self) -> RunSummary:
        """Read the summary back"""
        pass


class FileMetricsRepository(MetricsRepository):
    """metrics.csv, summary.json and masks.csv inside one run directory"""
    
    def __init__(self, run_dir: Union[str, Path]):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._mask_header_written = (self.run_dir / MASK_DUMP_FILE).exists()
    
    @property
    def metrics_path(self) -> Path:
        return self.run_dir / METRICS_FILE
    
    @property
    def summary_path(self) -> Path:
        return self.run_dir / SUMMARY_FILE
    
    @property
    def mask_path(self) -> Path:
        return self.run_dir / MASK_DUMP_FILE
    
    def save_metrics(self, metrics: RunMetrics) -> Path:
        with open(self.metrics_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(metrics.header())
            writer.writerows(metrics.rows())
        logger.debug(f"Metrics written: {self.metrics_path}")
        return self.metrics_path
    
    def save_summary(self, summary: RunSummary) -> Path:
        self.summary_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        logger.debug(f"Summary written: {self.summary_path}")
        return self.summary_path
    
    def append_mask_rows(self, rows: Iterable[Sequence]) -> int:
        count = 0
        with open(self.mask_path, "a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            if not self._mask_header_written:
                writer.writerow(MASK_DUMP_COLUMNS)
                self._mask_header_written = True
            for row in rows:
                writer.writerow([_cell(v) for v in row])
                count += 1
        return count
    
    def load_summary(self) -> RunSummary:
        if not self.summary_path.exists():
            raise ReportError(f"no summary in {self.run_dir}")
        return RunSummary.model_validate_json(self.summary_path.read_text(encoding="utf-8"))


def find_summaries(root: Union[str, Path]) -> List[Path]:
    """Every summary.json under ``root``, sorted"""
    root = Path(root)
    if not root.exists():
        raise ReportError(f"runs directory not found: {root}")
    return sorted(root.rglob(SUMMARY_FILE))
