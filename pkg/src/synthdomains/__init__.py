"""Synthetic multi-modal source/target domains with planted negatives"""
from synthdomains.schemas import Domain, DomainSpec, Segment, DomainDataset, DomainGeometry, AmbiguousPlacement, feature_matrix
from synthdomains.generator import generate, negative_count, ambiguous_center
from synthdomains.batching import MixedBatch, batch_iterator, source_batches
from synthdomains.quarantine import evaluation_labels, held_out_target, labeled_target_batches
from synthdomains.io import save_dataset, load_dataset, load_spec
from synthdomains.scenarios import PROFILES, DEFAULT_SCENARIO, scenario_names, scenario_spec, spec_for_scenario

__all__ = [
    "Domain",
    "DomainSpec",
    "Segment",
    "DomainDataset",
    "DomainGeometry",
    "AmbiguousPlacement",
    "feature_matrix",
    "generate",
    "negative_count",
    "ambiguous_center",
    "MixedBatch",
    "batch_iterator",
    "source_batches",
    "evaluation_labels",
    "labeled_target_batches",
    "held_out_target",
    "save_dataset",
    "load_dataset",
    "load_spec",
    "PROFILES",
    "DEFAULT_SCENARIO",
    "scenario_names",
    "scenario_spec",
    "spec_for_scenario",
]
