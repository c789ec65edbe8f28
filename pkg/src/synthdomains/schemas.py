"""
Synthetic domain schemas - DomainSpec, Segment, DomainDataset
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Domain(str, Enum):
    """Which side of the adaptation problem a segment belongs to"""
    SOURCE = "source"
    TARGET = "target"


PerModality = Union[float, List[float]]


class DomainSpec(BaseModel):
    """Parameters of one synthetic source/target pair"""
    model_config = ConfigDict(extra="forbid")
    
    num_classes: int = Field(8, ge=2)
    num_modalities: int = Field(2, ge=1)
    feature_dim: int = Field(64, ge=2)
    samples_per_class: int = Field(60, ge=1)
    test_samples_per_class: int = Field(100, ge=1)  # clean held-out target split
    class_separation: PerModality = [5.0, 3.5]
    shift: PerModality = [3.0, 3.0]
    shift_alignment: float = Field(0.6, ge=0.0, le=1.0)  # share of the shift inside the class-mean span
    noise_std: float = Field(1.0, gt=0.0)
    source_negative_fraction: float = Field(0.2, ge=0.0, lt=1.0)
    target_negative_fraction: float = Field(0.2, ge=0.0, lt=1.0)
    ambiguous_noise_scale: float = Field(0.25, ge=0.0)
    class_weights: Optional[List[float]] = None
    seed: int = 0
    
    @model_validator(mode="before")
    @classmethod
    def _expand_negative_fraction(cls, data):
        # A single `negative_fraction` sets both domains
        if isinstance(data, dict) and "negative_fraction" in data:
            data = dict(data)
            fraction = data.pop("negative_fraction")
            data.setdefault("source_negative_fraction", fraction)
            data.setdefault("target_negative_fraction", fraction)
        return data
    
    @model_validator(mode="after")
    def _check_lengths(self):
        for name in ("class_separation", "shift"):
            value = getattr(self, name)
            if isinstance(value, list) and len(value) != self.num_modalities:
                raise ValueError(f"{name} needs {self.num_modalities} entries, got {len(value)}")
        if self.class_weights is not None:
            if len(self.class_weights) != self.num_classes:
                raise ValueError("class_weights needs one entry per class")
            if any(w <= 0 for w in self.class_weights):
                raise ValueError("class_weights must be positive")
        return self
    
    def separation_for(self, modality: int) -> float:
        value = self.class_separation
        return float(value[modality] if isinstance(value, list) else value)
    
    def shift_for(self, modality: int) -> float:
        value = self.shift
        return float(value[modality] if isinstance(value, list) else value)
    
    def negative_fraction(self, domain: Domain) -> float:
        if domain == Domain.SOURCE:
            return self.source_negative_fraction
        return self.target_negative_fraction
    
    def class_counts(self) -> List[int]:
        """Samples per class in each domain (balanced unless class_weights is set)"""
        if self.class_weights is None:
            return [self.samples_per_class] * self.num_classes
        weights = np.asarray(self.class_weights, dtype=np.float64)
        weights = weights / weights.sum()
        total = self.samples_per_class * self.num_classes
        return [max(1, int(round(total * w))) for w in weights]


@dataclass(frozen=True, eq=False)
class Segment:
    """
    One training instance
    
    The class label is stored for every segment but only readable through
    ``class_label`` for source segments; target labels go through
    ``synthdomains.quarantine``.
    """
    id: int
    features: Tuple[np.ndarray, ...]
    domain: Domain
    is_negative: bool
    _label: int = field(repr=False, default=-1)
    
    @property
    def class_label(self) -> Optional[int]:
        return self._label if self.domain == Domain.SOURCE else None
    
    @property
    def num_modalities(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class AmbiguousPlacement:
    """How one ambiguous target segment was mixed: weight on its own class mean"""
    label: int
    other: int
    weight: float


@dataclass(frozen=True, eq=False)
class DomainGeometry:
    """Construction parameters, kept for diagnostics (absent after a file load)"""
    class_means: np.ndarray   # K x C x d, source means
    shifts: np.ndarray        # K x d
    outlier_centers: np.ndarray  # K x d, less-relevant source cluster
    ambiguous: Dict[int, AmbiguousPlacement] = field(default_factory=dict)  # by segment id

    def with_ambiguous(self, placements: Dict[int, AmbiguousPlacement]) -> "DomainGeometry":
        return replace(self, ambiguous=dict(placements))


@dataclass(eq=False)
class DomainDataset:
    """
    Generated (or loaded) segments

    ``target`` is the unlabeled training split; ``target_test`` is held out
    and only scored, never trained on.
    """
    spec: DomainSpec
    source: List[Segment]
    target: List[Segment]
    target_test: List[Segment] = field(default_factory=list)
    geometry: Optional[DomainGeometry] = None
    
    def segments(self, domain: Domain) -> List[Segment]:
        return self.source if domain == Domain.SOURCE else self.target
    
    def negative_count(self, domain: Domain) -> int:
        return sum(1 for s in self.segments(domain) if s.is_negative)
    
    def observed_negative_fraction(self, domain: Domain) -> float:
        segments = self.segments(domain)
        return self.negative_count(domain) / len(segments) if segments else 0.0
    
    def by_id(self) -> dict:
        return {s.id: s for s in self.source + self.target + self.target_test}


def feature_matrix(segments: Sequence[Segment], modality: int) -> np.ndarray:
    """Stack modality ``modality`` of ``segments`` into an n x d array"""
    return np.stack([s.features[modality] for s in segments])
