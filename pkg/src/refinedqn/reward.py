"""
Relevance measure and the thresholded reward
"""
from typing import Callable

import numpy as np

from diffcore import stable_sigmoid
from synthdomains import Domain


# Maps n x d_f embeddings to n discriminator logits (no GRL effect)
LogitScorer = Callable[[np.ndarray], np.ndarray]


def relevance_from_logit(logit: float, domain: Domain) -> float:
    """
    sigmoid(logit) for source, 1 - sigmoid(logit) for target
    
    With source labelled 0 and target 1, a high value means the segment looks
    like the other domain.
    """
    score = float(stable_sigmoid(np.array([logit]))[0])
    return score if domain == Domain.SOURCE else 1.0 - score


def reward_from_relevance(relevance: float, tau: float) -> float:
    """+1 when relevance < tau, else -1 (the boundary gets -1)"""
    return 1.0 if relevance < tau else -1.0


def reward_from_logit(logit: float, domain: Domain, tau: float) -> float:
    return reward_from_relevance(relevance_from_logit(logit, domain), tau)


def relevance(embedding: np.ndarray, domain: Domain, scorer: LogitScorer) -> float:
    """Relevance of one embedding under the discriminator wrapped by ``scorer``"""
    logit = scorer(np.asarray(embedding, dtype=np.float64).reshape(1, -1))[0]
    return relevance_from_logit(float(logit), domain)


def reward(embedding: np.ndarray, domain: Domain, tau: float, scorer: LogitScorer) -> float:
    return reward_from_relevance(relevance(embedding, domain, scorer), tau)
