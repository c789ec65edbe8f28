"""Two-stage training, run artifacts and the ablation suite"""
from traincore.schemas import (
    AgentFlags,
    RunMode,
    RunSummary,
    SelectionStats,
    TrainConfig,
    config_hash,
    load_config,
    parse_config,
)
from traincore.metrics import (
    MASK_DUMP_COLUMNS,
    EvalRecord,
    FileMetricsRepository,
    MetricsRepository,
    RunMetrics,
    StepRecord,
    find_summaries,
)
from traincore.trainer import Trainer, build_refiner, run_training
from traincore.ablation import AblationRow, ablation_variants, run_ablation_suite, supervised_upper_bound

__all__ = [
    "AgentFlags",
    "RunMode",
    "RunSummary",
    "SelectionStats",
    "TrainConfig",
    "config_hash",
    "load_config",
    "parse_config",
    "MASK_DUMP_COLUMNS",
    "EvalRecord",
    "FileMetricsRepository",
    "MetricsRepository",
    "RunMetrics",
    "StepRecord",
    "find_summaries",
    "Trainer",
    "build_refiner",
    "run_training",
    "AblationRow",
    "ablation_variants",
    "run_ablation_suite",
    "supervised_upper_bound",
]
