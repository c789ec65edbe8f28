"""
Batch iterators over a DomainDataset
"""
from dataclasses import dataclass
from typing import Iterator, List

import numpy as np

from errors import ConfigError
from synthdomains.schemas import DomainDataset, Segment


@dataclass
class MixedBatch:
    """Equal halves of source and target segments"""
    source: List[Segment]
    target: List[Segment]
    epoch: int
    index: int
    
    @property
    def size(self) -> int:
        return len(self.source) + len(self.target)


def batch_iterator(dataset: DomainDataset, batch_size: int, seed: int) -> Iterator[MixedBatch]:
    """
    Endless stream of mixed batches, reshuffled every epoch
    
    Args:
        dataset: Source and target segments
        batch_size: Even total size; each half gets batch_size / 2
        seed: Shuffle seed (same seed, same stream)
        
    Raises:
        ConfigError: odd batch size or a half larger than either domain
    """
    if batch_size <= 0 or batch_size % 2:
        raise ConfigError(f"mixed batch size must be a positive even number, got {batch_size}")
    half = batch_size // 2
    if half > len(dataset.source) or half > len(dataset.target):
        raise ConfigError(
            f"batch size {batch_size} exceeds dataset size "
            f"({len(dataset.source)} source / {len(dataset.target)} target)"
        )
    rng = np.random.default_rng(seed)
    per_epoch = min(len(dataset.source), len(dataset.target)) // half
    epoch = 0
    while True:
        source_order = rng.permutation(len(dataset.source))
        target_order = rng.permutation(len(dataset.target))
        for index in range(per_epoch):
            window = slice(index * half, (index + 1) * half)
            yield MixedBatch(
                source=[dataset.source[i] for i in source_order[window]],
                target=[dataset.target[i] for i in target_order[window]],
                epoch=epoch,
                index=index,
            )
        epoch += 1


def source_batches(dataset: DomainDataset, batch_size: int, seed: int) -> Iterator[List[Segment]]:
    """Endless stream of all-source batches (stage 1)"""
    if batch_size <= 0 or batch_size > len(dataset.source):
        raise ConfigError(f"batch size {batch_size} exceeds source domain size {len(dataset.source)}")
    rng = np.random.default_rng(seed)
    while True:
        order = rng.permutation(len(dataset.source))
        for start in range(0, len(order) - batch_size + 1, batch_size):
            yield [dataset.source[i] for i in order[start:start + batch_size]]
