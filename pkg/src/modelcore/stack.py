"""
ModalityStack - extractor F^k, classifier C^k and discriminator D^k of one modality
"""
from typing import List, Optional

import numpy as np

from diffcore import DEFAULT_LEAKY_SLOPE, Tensor, dropout, grl, leaky_relu
from modelcore.layers import Linear


class ModalityStack:
    """
    Networks for a single modality
    
    F^k: d -> hidden -> d_f with LeakyReLU after each layer and dropout on the
    embedding during training. C^k: one linear layer d_f -> C.
    D^k: GRL, then d_f -> disc_hidden -> 1 with LeakyReLU in between.
    """
    
    def __init__(
        self,
        modality: int,
        feature_dim: int,
        embed_dim: int,
        num_classes: int,
        rng: np.random.Generator,
        hidden_dim: int = 128,
        disc_hidden_dim: int = 128,
        dropout_rate: float = 0.5,
        leaky_slope: float = DEFAULT_LEAKY_SLOPE,
    ):
        prefix = f"m{modality}"
        self.modality = modality
        self.feature_dim = feature_dim
        self.embed_dim = embed_dim
        self.dropout_rate = dropout_rate
        self.leaky_slope = leaky_slope
        
        self.extractor_fc1 = Linear(feature_dim, hidden_dim, rng, f"{prefix}.extractor.fc1")
        self.extractor_fc2 = Linear(hidden_dim, embed_dim, rng, f"{prefix}.extractor.fc2")
        self.classifier = Linear(embed_dim, num_classes, rng, f"{prefix}.classifier")
        self.disc_fc1 = Linear(embed_dim, disc_hidden_dim, rng, f"{prefix}.discriminator.fc1")
        self.disc_fc2 = Linear(disc_hidden_dim, 1, rng, f"{prefix}.discriminator.fc2")
    
    def extract(self, x: Tensor, train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        hidden = leaky_relu(self.extractor_fc1(x), self.leaky_slope)
        embedding = leaky_relu(self.extractor_fc2(hidden), self.leaky_slope)
        if train and self.dropout_rate > 0:
            embedding = dropout(embedding, self.dropout_rate, rng)
        return embedding
    
    def classify(self, embedding: Tensor) -> Tensor:
        return self.classifier(embedding)
    
    def discriminate(self, embedding: Tensor, grl_scale: Optional[float] = 1.0) -> Tensor:
        """Domain logits (n x 1); ``grl_scale=None`` leaves the GRL out"""
        x = embedding if grl_scale is None else grl(embedding, grl_scale)
        hidden = leaky_relu(self.disc_fc1(x), self.leaky_slope)
        return self.disc_fc2(hidden)
    
    def extractor_parameters(self) -> List[Tensor]:
        return self.extractor_fc1.parameters() + self.extractor_fc2.parameters()
    
    def classifier_parameters(self) -> List[Tensor]:
        return self.classifier.parameters()
    
    def discriminator_parameters(self) -> List[Tensor]:
        return self.disc_fc1.parameters() + self.disc_fc2.parameters()
    
    def parameters(self) -> List[Tensor]:
        return self.extractor_parameters() + self.classifier_parameters() + self.discriminator_parameters()
