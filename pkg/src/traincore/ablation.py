"""
Ablation suite - every mode and agent switch-off over several seeds
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError
from synthdomains import DomainDataset
from traincore.schemas import RunMode, RunSummary, TrainConfig
from traincore.trainer import run_training
from utils.logger import console_level, get_logger, init_worker

logger = get_logger()


MIN_SEEDS = 3


@dataclass
class AblationRow:
    variant: str
    accuracies: List[float]
    
    @property
    def n_seeds(self) -> int:
        return len(self.accuracies)
    
    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))
    
    @property
    def std(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if self.n_seeds > 1 else 0.0


def ablation_variants(base: TrainConfig, num_modalities: int) -> Dict[str, TrainConfig]:
    """
    Named configs of the suite, in table order
    
    Agent switch-offs are adversarial_ir runs with some flags off.
    """
    all_on = [True] * num_modalities
    all_off = [False] * num_modalities
    ir = base.with_updates(mode=RunMode.ADVERSARIAL_IR.value, agent_kind="dqn", agents={})
    variants = {
        "source_only": base.with_updates(mode=RunMode.SOURCE_ONLY.value),
        "adversarial_only": base.with_updates(mode=RunMode.ADVERSARIAL_ONLY.value),
        "adversarial_ir": ir,
    }
    for k in range(num_modalities):
        flags = [j != k for j in range(num_modalities)]
        variants[f"w/o modality-{k} agents"] = ir.with_updates(agents={"source": flags, "target": flags})
    variants["w/o S-agents"] = ir.with_updates(agents={"source": all_off, "target": all_on})
    variants["w/o T-agents"] = ir.with_updates(agents={"source": all_on, "target": all_off})
    variants["random_ir"] = ir.with_updates(agent_kind="random")
    variants["supervised_target"] = base.with_updates(mode=RunMode.SUPERVISED_TARGET.value)
    return variants


def _run_one(job: Tuple[str, TrainConfig, DomainDataset, Optional[str]]) -> Tuple[str, RunSummary]:
    variant, config, dataset, run_dir = job
    return variant, run_training(config, dataset, run_dir, variant)


def _run_dir(root: Optional[Path], variant: str, seed: int) -> Optional[str]:
    if root is None:
        return None
    safe = variant.replace("/", "").replace(" ", "_")
    return str(root / safe / f"seed{seed}")


def run_ablation_suite(
    base: TrainConfig,
    dataset: DomainDataset,
    seeds: Sequence[int],
    runs_root: Optional[Union[str, Path]] = None,
    workers: int = 1,
    variants: Optional[Sequence[str]] = None,
) -> List[AblationRow]:
    """
    Run every variant for every seed and collect mean/std accuracy rows
    
    Args:
        base: Config the variants are derived from
        dataset: Shared source/target data
        seeds: At least three run seeds
        runs_root: Where per-run artifacts go (nothing written when None)
        workers: Processes to run in parallel (1 runs in-process)
        variants: Subset of variant names to run
        
    Raises:
        ConfigError: fewer than three seeds or an unknown variant name
    """
    if len(seeds) < MIN_SEEDS:
        raise ConfigError(f"ablation needs at least {MIN_SEEDS} seeds, got {len(seeds)}")
    configs = ablation_variants(base, dataset.spec.num_modalities)
    names = list(configs) if variants is None else list(variants)
    unknown = [name for name in names if name not in configs]
    if unknown:
        raise ConfigError(f"unknown ablation variants: {unknown}; known: {list(configs)}")
    
    root = Path(runs_root) if runs_root is not None else None
    jobs = [
        (name, configs[name].with_updates(seed=seed), dataset, _run_dir(root, name, seed))
        for name in names
        for seed in seeds
    ]
    logger.info(f"Ablation: {len(names)} variants x {len(seeds)} seeds, workers={workers}")
    
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=init_worker, initargs=(console_level(),)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    
    accuracies: Dict[str, List[float]] = {name: [] for name in names}
    for name, summary in results:
        accuracies[name].append(summary.final_accuracy)
    return [AblationRow(name, accuracies[name]) for name in names]


def supervised_upper_bound(config: TrainConfig, dataset: DomainDataset, run_dir: Optional[Union[str, Path]] = None) -> float:
    """Target accuracy of a classifier trained on the quarantined target labels"""
    summary = run_training(config.with_updates(mode=RunMode.SUPERVISED_TARGET.value), dataset, run_dir, "supervised_target")
    return summary.final_accuracy
