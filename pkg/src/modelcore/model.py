"""
TwoStreamModel - late-fusion recognition model with per-modality discriminators
"""
from typing import Dict, List, Optional, Sequence

import numpy as np

from diffcore import (
    DEFAULT_LEAKY_SLOPE,
    Tensor,
    add,
    binary_cross_entropy_with_logits,
    no_tape,
    softmax_cross_entropy,
    take_rows,
)
from errors import ContractViolationError, InputError, UndefinedMetricError
from modelcore.stack import ModalityStack
from synthdomains import Domain, Segment, feature_matrix
from utils.logger import get_logger

logger = get_logger()


# Domain label convention, fixed for the whole system
SOURCE_DOMAIN_LABEL = 0
TARGET_DOMAIN_LABEL = 1
DOMAIN_LABELS = {Domain.SOURCE: SOURCE_DOMAIN_LABEL, Domain.TARGET: TARGET_DOMAIN_LABEL}


def domain_targets(segments: Sequence[Segment]) -> np.ndarray:
    return np.array([DOMAIN_LABELS[s.domain] for s in segments], dtype=np.float64)


class TwoStreamModel:
    """
    K modality stacks whose classifier logits are summed before one softmax
    
    ``grl_scale`` applies to every discriminator; ``None`` removes the GRL
    (used to compare reversed and plain gradients).
    """
    
    def __init__(
        self,
        num_modalities: int,
        feature_dim: int,
        num_classes: int,
        embed_dim: int = 64,
        hidden_dim: int = 128,
        disc_hidden_dim: int = 128,
        dropout: float = 0.5,
        grl_scale: Optional[float] = 1.0,
        leaky_slope: float = DEFAULT_LEAKY_SLOPE,
        seed: int = 0,
    ):
        self.num_modalities = num_modalities
        self.feature_dim = feature_dim
        self.num_classes = num_classes
        self.embed_dim = embed_dim
        self.grl_scale = grl_scale
        
        rng = np.random.default_rng(seed)
        self.stacks: List[ModalityStack] = [
            ModalityStack(
                modality=k,
                feature_dim=feature_dim,
                embed_dim=embed_dim,
                num_classes=num_classes,
                rng=rng,
                hidden_dim=hidden_dim,
                disc_hidden_dim=disc_hidden_dim,
                dropout_rate=dropout,
                leaky_slope=leaky_slope,
            )
            for k in range(num_modalities)
        ]
    
    # ------------------------------------------------------------------ inputs
    
    def _as_inputs(self, features: Sequence) -> List[Tensor]:
        if len(features) != self.num_modalities:
            raise InputError(f"expected {self.num_modalities} modalities, got {len(features)}")
        inputs = []
        for k, x in enumerate(features):
            if x is None:
                raise InputError(f"modality {k} is missing")
            tensor = x if isinstance(x, Tensor) else Tensor(x)
            if tensor.cols != self.feature_dim:
                raise InputError(f"modality {k}: expected width {self.feature_dim}, got {tensor.cols}")
            inputs.append(tensor)
        return inputs
    
    def segment_features(self, segments: Sequence[Segment]) -> List[np.ndarray]:
        for segment in segments:
            if segment.num_modalities != self.num_modalities:
                raise InputError(f"segment {segment.id} has {segment.num_modalities} modalities")
        return [feature_matrix(segments, k) for k in range(self.num_modalities)]
    
    # ----------------------------------------------------------------- forward
    
    def embed(self, features: Sequence, train: bool = False, rng: Optional[np.random.Generator] = None) -> List[Tensor]:
        """F^k(x^k) for every modality"""
        inputs = self._as_inputs(features)
        return [stack.extract(x, train, rng) for stack, x in zip(self.stacks, inputs)]
    
    def fuse(self, embeddings: Sequence[Tensor]) -> Tensor:
        """Sum of per-modality classifier logits"""
        fused = self.stacks[0].classify(embeddings[0])
        for stack, embedding in zip(self.stacks[1:], embeddings[1:]):
            fused = add(fused, stack.classify(embedding))
        return fused
    
    def classify_fused(self, features: Sequence, train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Fused logits sum_k C^k(F^k(x^k))
        
        Args:
            features: K arrays/tensors of shape n x d (a single segment is 1 x d)
            
        Raises:
            InputError: a modality is missing or has the wrong width
        """
        return self.fuse(self.embed(features, train, rng))
    
    def domain_logit(self, features, modality: int, train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """D^k(GRL(F^k(x^k))) for one modality, n x 1"""
        if not 0 <= modality < self.num_modalities:
            raise InputError(f"modality index {modality} out of range")
        x = features if isinstance(features, Tensor) else Tensor(features)
        embedding = self.stacks[modality].extract(x, train, rng)
        return self.stacks[modality].discriminate(embedding, self.grl_scale)
    
    # ------------------------------------------------------------------ losses
    
    def labeled_loss(self, embeddings: Sequence[Tensor], labels: Sequence[int]) -> Tensor:
        """Softmax cross-entropy of the fused logits, summed over rows"""
        return softmax_cross_entropy(self.fuse(embeddings), list(labels))
    
    def loss_cls(self, segments: Sequence[Segment], train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Classification loss over a labeled source batch
        
        Raises:
            ContractViolationError: a segment is not a labeled source segment
        """
        labels = []
        for segment in segments:
            if segment.domain != Domain.SOURCE or segment.class_label is None:
                raise ContractViolationError(f"loss_cls got non-source segment {segment.id}")
            labels.append(segment.class_label)
        embeddings = self.embed(self.segment_features(segments), train, rng)
        return self.labeled_loss(embeddings, labels)
    
    def adversarial_loss_modality(self, modality: int, embedding: Tensor, targets: np.ndarray) -> Tensor:
        logits = self.stacks[modality].discriminate(embedding, self.grl_scale)
        return binary_cross_entropy_with_logits(logits, targets)
    
    def adversarial_loss(
        self,
        embeddings: Sequence[Tensor],
        targets: np.ndarray,
        keep_masks: Optional[Sequence[np.ndarray]] = None,
    ) -> Optional[Tensor]:
        """
        Sum over modalities of BCE between D^k logits and domain labels
        
        Args:
            embeddings: Per-modality n x d_f embeddings of the whole batch
            targets: n domain labels (source 0, target 1)
            keep_masks: Per-modality boolean masks of refined rows (None keeps all)
        """
        total = None
        for k, embedding in enumerate(embeddings):
            mask = np.ones(len(targets), dtype=bool) if keep_masks is None else np.asarray(keep_masks[k], dtype=bool)
            rows = np.flatnonzero(mask)
            if rows.size == 0:
                continue
            kept_targets = targets[rows]
            if np.all(kept_targets == kept_targets[0]):
                logger.warning(f"adversarial batch for modality {k} holds a single domain")
            selected = embedding if rows.size == len(targets) else take_rows(embedding, rows)
            loss = self.adversarial_loss_modality(k, selected, kept_targets)
            total = loss if total is None else add(total, loss)
        return total
    
    def loss_adv(
        self,
        segments: Sequence[Segment],
        keep_masks: Optional[Sequence[np.ndarray]] = None,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Adversarial loss over a refined batch of both domains"""
        embeddings = self.embed(self.segment_features(segments), train, rng)
        return self.adversarial_loss(embeddings, domain_targets(segments), keep_masks)
    
    # --------------------------------------------------------------- inference
    
    def embeddings(self, features: np.ndarray, modality: int) -> np.ndarray:
        """Eval-mode F^k(x) as a numpy array, never recorded"""
        with no_tape():
            return self.stacks[modality].extract(Tensor(features)).data
    
    def discriminator_logits(self, embeddings: np.ndarray, modality: int) -> np.ndarray:
        """D^k logits for precomputed embeddings, shape (n,); GRL has no forward effect"""
        with no_tape():
            return self.stacks[modality].discriminate(Tensor(embeddings), grl_scale=None).data[:, 0]
    
    def predict(self, segments: Sequence[Segment]) -> np.ndarray:
        with no_tape():
            logits = self.classify_fused(self.segment_features(segments)).data
        # np.argmax picks the lowest index on ties
        return np.argmax(logits, axis=1)
    
    def top1_accuracy(self, segments: Sequence[Segment], labels: Sequence[int]) -> float:
        """
        Fraction of segments whose fused argmax equals the ground truth
        
        Raises:
            UndefinedMetricError: empty evaluation set
        """
        if len(segments) == 0:
            raise UndefinedMetricError("top-1 accuracy of an empty set")
        predictions = self.predict(segments)
        return float(np.mean(predictions == np.asarray(labels)))
    
    # -------------------------------------------------------------- parameters
    
    def named_parameters(self) -> Dict[str, Tensor]:
        return {p.name: p for stack in self.stacks for p in stack.parameters()}
    
    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())
    
    def extractor_parameters(self) -> List[Tensor]:
        return [p for stack in self.stacks for p in stack.extractor_parameters()]
    
    def classifier_parameters(self) -> List[Tensor]:
        return [p for stack in self.stacks for p in stack.classifier_parameters()]
    
    def discriminator_parameters(self) -> List[Tensor]:
        return [p for stack in self.stacks for p in stack.discriminator_parameters()]
    
    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}
    
    def load_state_dict(self, state: Dict[str, np.ndarray]):
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise InputError(f"state is missing parameters: {sorted(missing)[:3]}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise InputError(f"parameter {name}: shape {value.shape} != {p.data.shape}")
            p.data = value.copy()
