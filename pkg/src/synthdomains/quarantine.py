"""
Evaluation-only access to target labels

Training code reads ``Segment.class_label``, which is None for target
segments. The helpers here are the only sanctioned way to reach the hidden
target labels: for evaluation, for serialization, and for the supervised
upper-bound run.
"""
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from synthdomains.schemas import DomainDataset, Segment
from errors import ConfigError


def hidden_label(segment: Segment) -> int:
    return segment._label


def evaluation_labels(segments: Sequence[Segment]) -> List[int]:
    """Ground-truth labels for scoring predictions"""
    return [segment._label for segment in segments]


def labeled_target_batches(
    dataset: DomainDataset,
    batch_size: int,
    seed: int,
) -> Iterator[Tuple[List[Segment], List[int]]]:
    """
    Endless shuffled (segments, labels) batches over the target training split
    
    Only the supervised upper bound may train on these. The held-out
    ``target_test`` split is never batched.
    """
    target = dataset.target
    if batch_size > len(target):
        raise ConfigError(f"batch size {batch_size} exceeds target domain size {len(target)}")
    rng = np.random.default_rng(seed)
    while True:
        order = rng.permutation(len(target))
        for start in range(0, len(target) - batch_size + 1, batch_size):
            batch = [target[i] for i in order[start:start + batch_size]]
            yield batch, evaluation_labels(batch)


def held_out_target(dataset: DomainDataset) -> Tuple[List[Segment], List[int]]:
    """The clean target test split with its labels, scored by every run mode"""
    if not dataset.target_test:
        raise ConfigError("dataset has no held-out target split; regenerate it with gen-data")
    return dataset.target_test, evaluation_labels(dataset.target_test)
