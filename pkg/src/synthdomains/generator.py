"""
Synthetic source/target domains with injected negatives

Per modality, class means sit on orthogonal directions of a random basis so
every pair of means is exactly ``class_separation`` apart. Target features
are the source distribution translated by a per-modality shift. Two kinds of
negatives are planted in the training splits:

- less-relevant source segments, resampled around one cluster displaced from
  the source centroid against the shift, at least 3.5x the class separation
  from every target mean
- ambiguous target segments, drawn between two distinct class means of the
  target domain with a small spread

The held-out target test split is drawn clean.
"""
import math
from typing import Dict, List, Tuple

import numpy as np

from errors import ConfigError
from synthdomains.schemas import (
    AmbiguousPlacement,
    Domain,
    DomainDataset,
    DomainGeometry,
    DomainSpec,
    Segment,
)
from utils.logger import get_logger

logger = get_logger()


OUTLIER_DISTANCE_FACTOR = 3.5
AMBIGUOUS_WEIGHT_SPREAD = 0.1


def negative_count(fraction: float, total: int) -> int:
    """floor(fraction * total), robust to float representation of the fraction"""
    return int(math.floor(fraction * total + 1e-9))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _retreat_distance(start: np.ndarray, direction: np.ndarray, targets: np.ndarray, radius: float) -> float:
    """
    Smallest a >= 0 with ||start - a * direction - t|| >= radius for every row t
    
    ``direction`` is a unit vector; each row gives a quadratic in a whose
    larger root bounds a from below.
    """
    gap = start - targets
    along = gap @ direction
    disc = along ** 2 - np.sum(gap * gap, axis=1) + radius ** 2
    needed = np.where(disc > 0, along + np.sqrt(np.maximum(disc, 0.0)), 0.0)
    return max(float(needed.max()), 0.0)


def _build_geometry(spec: DomainSpec, rng: np.random.Generator) -> DomainGeometry:
    d, C, K = spec.feature_dim, spec.num_classes, spec.num_modalities
    # One extra orthogonal direction is reserved for a shift-free outlier offset
    if C + 1 > d:
        raise ConfigError(
            f"cannot place {C} equidistant class means plus an outlier direction in {d} dimensions"
        )
    
    means = np.zeros((K, C, d))
    shifts = np.zeros((K, d))
    outliers = np.zeros((K, d))
    for k in range(K):
        basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
        separation = spec.separation_for(k)
        means[k] = (separation / math.sqrt(2.0)) * basis[:, :C].T
        
        in_span = basis[:, :C] @ rng.standard_normal(C)
        anywhere = rng.standard_normal(d)
        direction = (
            spec.shift_alignment * _unit(in_span)
            + (1.0 - spec.shift_alignment) * _unit(anywhere)
        )
        shifts[k] = spec.shift_for(k) * spec.noise_std * _unit(direction)
        
        # Behind the source along the shift axis, so the discriminator ranks
        # the cluster as more source-like than any clean source segment
        away = -_unit(shifts[k]) if np.linalg.norm(shifts[k]) > 0 else basis[:, C]
        centroid = means[k].mean(axis=0)
        distance = _retreat_distance(
            centroid, -away, means[k] + shifts[k], OUTLIER_DISTANCE_FACTOR * separation
        )
        outliers[k] = centroid + distance * away
    return DomainGeometry(class_means=means, shifts=shifts, outlier_centers=outliers)


def _check_ambiguous_margin(spec: DomainSpec):
    """
    A weight within 0.5 +- spread keeps the centre nearer the midpoint than
    either mean's 1-sigma core only if separation * (0.5 - 2 * spread) > sigma
    """
    if spec.negative_fraction(Domain.TARGET) == 0.0:
        return
    for k in range(spec.num_modalities):
        margin = spec.separation_for(k) * (0.5 - 2.0 * AMBIGUOUS_WEIGHT_SPREAD)
        if margin <= spec.noise_std:
            raise ConfigError(
                f"class separation {spec.separation_for(k)} of modality {k} is too small "
                f"to place ambiguous target segments between two means (noise_std {spec.noise_std})"
            )


def _labels(counts: List[int]) -> List[int]:
    labels: List[int] = []
    for c, count in enumerate(counts):
        labels.extend([c] * count)
    return labels


def ambiguous_center(geometry: DomainGeometry, modality: int, placement: AmbiguousPlacement) -> np.ndarray:
    """Noise-free position of an ambiguous target segment"""
    means = geometry.class_means[modality]
    return (
        placement.weight * means[placement.label]
        + (1.0 - placement.weight) * means[placement.other]
        + geometry.shifts[modality]
    )


def _domain_segments(
    spec: DomainSpec,
    geometry: DomainGeometry,
    domain: Domain,
    labels: List[int],
    first_id: int,
    rng: np.random.Generator,
    fraction: float,
) -> Tuple[List[Segment], Dict[int, AmbiguousPlacement]]:
    n = len(labels)
    sigma = spec.noise_std
    K, d = spec.num_modalities, spec.feature_dim
    
    flagged = np.zeros(n, dtype=bool)
    flagged[rng.permutation(n)[:negative_count(fraction, n)]] = True
    
    segments = []
    placements: Dict[int, AmbiguousPlacement] = {}
    for i, label in enumerate(labels):
        features: List[np.ndarray] = []
        placement = None
        if flagged[i] and domain == Domain.TARGET:
            other = int(rng.integers(spec.num_classes - 1))
            other = other if other < label else other + 1
            weight = 0.5 + rng.uniform(-AMBIGUOUS_WEIGHT_SPREAD, AMBIGUOUS_WEIGHT_SPREAD)
            placement = AmbiguousPlacement(label=label, other=other, weight=float(weight))
            placements[first_id + i] = placement
        for k in range(K):
            noise = rng.standard_normal(d) * sigma
            if placement is not None:
                center = ambiguous_center(geometry, k, placement)
                noise = noise * spec.ambiguous_noise_scale
            elif flagged[i]:
                center = geometry.outlier_centers[k]
            else:
                center = geometry.class_means[k, label]
                if domain == Domain.TARGET:
                    center = center + geometry.shifts[k]
            features.append(center + noise)
        segments.append(Segment(
            id=first_id + i,
            features=tuple(features),
            domain=domain,
            is_negative=bool(flagged[i]),
            _label=label,
        ))
    return segments, placements


def generate(spec: DomainSpec) -> DomainDataset:
    """
    Generate a labeled source domain, an unlabeled target training split and
    a clean held-out target test split
    
    Args:
        spec: Domain parameters, including the rng seed
        
    Returns:
        DomainDataset; identical specs give bitwise-identical datasets
        
    Raises:
        ConfigError: the class means cannot be placed in feature_dim dimensions,
            or the separation leaves no room between two means
    """
    _check_ambiguous_margin(spec)
    root = np.random.SeedSequence(spec.seed)
    geometry_seq, source_seq, target_seq, test_seq = root.spawn(4)
    geometry = _build_geometry(spec, np.random.default_rng(geometry_seq))
    
    train_labels = _labels(spec.class_counts())
    source, _ = _domain_segments(
        spec, geometry, Domain.SOURCE, train_labels, 0,
        np.random.default_rng(source_seq), spec.negative_fraction(Domain.SOURCE),
    )
    target, placements = _domain_segments(
        spec, geometry, Domain.TARGET, train_labels, len(source),
        np.random.default_rng(target_seq), spec.negative_fraction(Domain.TARGET),
    )
    target_test, _ = _domain_segments(
        spec, geometry, Domain.TARGET, _labels([spec.test_samples_per_class] * spec.num_classes),
        len(source) + len(target), np.random.default_rng(test_seq), 0.0,
    )
    geometry = geometry.with_ambiguous(placements)
    dataset = DomainDataset(spec=spec, source=source, target=target, target_test=target_test, geometry=geometry)
    logger.info(
        f"Generated domains: {len(source)} source ({dataset.negative_count(Domain.SOURCE)} negative), "
        f"{len(target)} target ({dataset.negative_count(Domain.TARGET)} negative), "
        f"{len(target_test)} target test, seed={spec.seed}"
    )
    return dataset
