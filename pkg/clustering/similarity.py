"""Cosine similarity between WiFi fingerprints and the adaptive threshold rule.

Only MACs heard in both fingerprints contribute to the dot product ``Y``; each
fingerprint's own norm runs over all of its MACs. RSS stays in raw negative
dBm, so every product is positive and the score lands in ``[0, 1]``.
"""

import math
from abc import ABC, abstractmethod
from typing import NewType, Sequence

import numpy as np

from model.config import PipelineConfig
from model.types import Fingerprint, ScanResult
from utils.exceptions import EmptyFingerprint

SimilarityScore = NewType("SimilarityScore", float)


def _as_fingerprint(item) -> Fingerprint:
    return item.fingerprint if isinstance(item, ScanResult) else item


def cosine_similarity(f1: Fingerprint, f2: Fingerprint) -> SimilarityScore:
    """
    Cosine similarity of two fingerprints.

    Args:
        f1 (Fingerprint): First fingerprint (a ScanResult is accepted too)
        f2 (Fingerprint): Second fingerprint

    Returns:
        SimilarityScore: ``Y / (sqrt(d1) * sqrt(d2))``, 0 when no MAC is shared

    Raises:
        EmptyFingerprint: If either fingerprint has no MAC
    """
    f1, f2 = _as_fingerprint(f1), _as_fingerprint(f2)
    if f1.p == 0 or f2.p == 0:
        raise EmptyFingerprint("cosine similarity needs two non-empty fingerprints")
    a, b = f1.entries, f2.entries
    if len(a) > len(b):
        a, b = b, a
    # fsum is exactly rounded, so the result does not depend on argument order
    y = math.fsum(r * b[mac] for mac, r in a.items() if mac in b)
    if y == 0.0:
        return SimilarityScore(0.0)
    return SimilarityScore(min(1.0, y / (f1.norm * f2.norm)))


def compute_threshold(f1: Fingerprint, f2: Fingerprint, cfg: PipelineConfig) -> float:
    """
    Adaptive similarity threshold for a pair of fingerprints.

    Both fingerprints at or below ``A_L`` APs use ``eps_low``; anything
    denser uses ``eps_high``.
    """
    f1, f2 = _as_fingerprint(f1), _as_fingerprint(f2)
    if f1.p <= cfg.ap_low_count and f2.p <= cfg.ap_low_count:
        return cfg.eps_low
    return cfg.eps_high


class ThresholdPolicy(ABC):
    """Decides whether two scans are DBSCAN neighbours."""

    @abstractmethod
    def threshold(self, f1: Fingerprint, f2: Fingerprint) -> float:
        """
        Similarity a pair must reach to count as neighbours.

        Args:
            f1 (Fingerprint): First fingerprint
            f2 (Fingerprint): Second fingerprint

        Returns:
            float: The threshold in (0, 1]
        """
        pass

    def are_neighbours(self, f1: Fingerprint, f2: Fingerprint) -> bool:
        if f1.p == 0 or f2.p == 0:
            return False
        return cosine_similarity(f1, f2) >= self.threshold(f1, f2)


class AdaptiveThreshold(ThresholdPolicy):
    """The AP-count switched rule used for indoor POIs."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg

    def threshold(self, f1: Fingerprint, f2: Fingerprint) -> float:
        return compute_threshold(f1, f2, self.cfg)


class FixedThreshold(ThresholdPolicy):
    """A single threshold for every pair, used for travel paths."""

    def __init__(self, eps: float):
        self.eps = eps

    def threshold(self, f1: Fingerprint, f2: Fingerprint) -> float:
        return self.eps


def similarity_matrix(items: Sequence) -> np.ndarray:
    """
    Pairwise similarity matrix, evaluated with :func:`cosine_similarity`.

    Empty fingerprints get similarity 0 to everything except 1 to themselves.
    """
    fps = [_as_fingerprint(item) for item in items]
    n = len(fps)
    sims = np.eye(n, dtype=float)
    for i in range(n):
        if fps[i].p == 0:
            continue
        for j in range(i + 1, n):
            if fps[j].p:
                sims[i, j] = sims[j, i] = cosine_similarity(fps[i], fps[j])
    return sims
