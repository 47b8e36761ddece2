"""Selection scores built from observed labels and estimated penalty labels.

The observed-label score rewards confidence on the label a sample arrived
with. The penalty score measures how much confidence falls on the classes
that typically corrupt that label. Subtracting the two separates genuinely
clean samples from corrupted ones that merely look confident:

    score_all = score_observed - lambda * score_penalty

Penalty labels are estimated per observed class from prediction confidences
averaged over that class, with the class's own entry removed and the rest
renormalized. With no usable mass the estimate falls back to the uniform
distribution over the other k - 1 classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ROW_SUM_TOL = 1e-9
MASS_TOL = 1e-12


def criteria_ol(confidences: np.ndarray, observed_onehot: np.ndarray) -> np.ndarray:
    """Confidence on the observed class, per sample."""
    return np.sum(confidences * observed_onehot, axis=-1)


def criteria_pl(confidences: np.ndarray, penalty_rows: np.ndarray) -> np.ndarray:
    """Confidence aligned with each sample's penalty label, per sample."""
    return np.sum(confidences * penalty_rows, axis=-1)


def criteria_all(
    confidences: np.ndarray,
    observed_onehot: np.ndarray,
    penalty_rows: np.ndarray,
    lam: float,
) -> np.ndarray:
    """Observed-class confidence minus lambda times the penalty alignment.

    Unbounded below; scores are ranks, never probabilities, so no clipping.
    """
    return criteria_ol(confidences, observed_onehot) - lam * criteria_pl(
        confidences, penalty_rows
    )


class ConfidenceAccumulator:
    """Running per-class sums of prediction confidences.

    Row j holds the sum of confidence vectors over samples whose observed
    label is j, plus a count, so class means survive across mini-batches.
    """

    def __init__(self, k: int):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.k = k
        self.sums = np.zeros((k, k), dtype=np.float64)
        self.counts = np.zeros(k, dtype=np.int64)

    def stack_confidences(self, confidences: np.ndarray, observed_labels: np.ndarray) -> None:
        """Fold one batch of confidences into the per-class sums."""
        confidences = np.asarray(confidences, dtype=np.float64)
        observed_labels = np.asarray(observed_labels, dtype=np.int64)
        np.add.at(self.sums, observed_labels, confidences)
        self.counts += np.bincount(observed_labels, minlength=self.k)

    def reset(self) -> None:
        self.sums[:] = 0.0
        self.counts[:] = 0

    def class_means(self) -> np.ndarray:
        """Mean confidence per observed class; zero rows where unseen."""
        means = np.zeros_like(self.sums)
        seen = self.counts > 0
        means[seen] = self.sums[seen] / self.counts[seen, None]
        return means


@dataclass(frozen=True)
class PenaltyLabelSet:
    """One penalty distribution per class, stamped with its source epoch.

    Row k has a zero at k, sums to one, and ``fallback_mask[k]`` records
    whether it came from the uniform fallback rather than the estimate.
    """

    labels: np.ndarray
    epoch_of_estimate: int
    fallback_mask: np.ndarray

    @property
    def k(self) -> int:
        return self.labels.shape[0]

    def validate(self) -> None:
        labels = self.labels
        k = self.k
        if labels.shape != (k, k):
            raise ValueError("penalty labels must be square")
        if np.any(np.abs(np.diagonal(labels)) > 0.0):
            raise ValueError("penalty labels must be zero on the own class")
        if np.any(labels < 0.0):
            raise ValueError("penalty labels must be non-negative")
        if np.any(np.abs(labels.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("penalty label rows must sum to 1")

    @classmethod
    def ideal_symmetric(cls, k: int, epoch: int = -1) -> "PenaltyLabelSet":
        """Uniform 1/(k-1) off the diagonal; the symmetric-noise ideal."""
        labels = np.full((k, k), 1.0 / (k - 1))
        np.fill_diagonal(labels, 0.0)
        return cls(labels, epoch, np.zeros(k, dtype=bool))


def estimate_penalty_labels(
    accumulator: ConfidenceAccumulator, epoch: int, mass_tol: float = MASS_TOL
) -> PenaltyLabelSet:
    """Penalty labels from accumulated confidences, one row per class.

    Each class's mean confidence has its own entry zeroed and the remaining
    entries divided by their total. A class that was never seen, or whose
    off-class mass is at or below ``mass_tol``, gets the uniform fallback
    and is marked in the fallback mask.
    """
    k = accumulator.k
    means = accumulator.class_means()
    off = means.copy()
    np.fill_diagonal(off, 0.0)
    mass = off.sum(axis=1)
    fallback = (accumulator.counts == 0) | (mass <= mass_tol)

    labels = np.empty((k, k), dtype=np.float64)
    labels[fallback] = 1.0 / (k - 1)
    labels[~fallback] = off[~fallback] / mass[~fallback, None]
    labels[np.arange(k), np.arange(k)] = 0.0
    estimate = PenaltyLabelSet(labels, epoch, fallback)
    estimate.validate()
    return estimate


def descending_order(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by score descending, ties by ascending index."""
    return np.argsort(-np.asarray(scores), kind="stable")


class AffineEquivalence(NamedTuple):
    residual: float
    ordering_identical: bool


def ideal_penalty_affine_check(
    batch_confidences: np.ndarray,
    observed_labels: np.ndarray,
    lam: float,
    k: int,
) -> AffineEquivalence:
    """Check that ideal symmetric penalties make the combined score affine.

    With the uniform off-class penalty, the combined score must equal
    (1 + lambda/(k-1)) * observed_score - lambda/(k-1) for every sample, and
    the descending orderings of the two scores must coincide exactly.
    Returns the worst absolute deviation and whether the orderings matched.
    """
    confidences = np.asarray(batch_confidences, dtype=np.float64)
    observed = np.asarray(observed_labels, dtype=np.int64)
    onehot = np.eye(k)[observed]
    penalty_rows = PenaltyLabelSet.ideal_symmetric(k).labels[observed]

    ol = criteria_ol(confidences, onehot)
    combined = criteria_all(confidences, onehot, penalty_rows, lam)
    affine = (1.0 + lam / (k - 1)) * ol - lam / (k - 1)
    residual = float(np.max(np.abs(combined - affine))) if ol.size else 0.0
    ordering_identical = bool(
        np.array_equal(descending_order(combined), descending_order(ol))
    )
    return AffineEquivalence(residual, ordering_identical)
