"""Two-stream recognition model: extractors, fused classifiers, discriminators"""
from modelcore.layers import Linear
from modelcore.stack import ModalityStack
from modelcore.model import (
    TwoStreamModel,
    DOMAIN_LABELS,
    SOURCE_DOMAIN_LABEL,
    TARGET_DOMAIN_LABEL,
    domain_targets,
)
from modelcore.checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Linear",
    "ModalityStack",
    "TwoStreamModel",
    "DOMAIN_LABELS",
    "SOURCE_DOMAIN_LABEL",
    "TARGET_DOMAIN_LABEL",
    "domain_targets",
    "save_checkpoint",
    "load_checkpoint",
]
