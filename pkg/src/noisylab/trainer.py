"""Training loop with per-batch sample selection.

Every epoch walks a fresh shuffled batch plan. During warm-up, or when no
selection variant is configured, the whole batch trains. Afterwards each
batch is scored, the top share by score is kept, and only those samples
contribute to the gradient step.

Penalty labels follow one of two update strategies, both refreshed at every
epoch end and consumed throughout the next epoch:

* stacked: confidences already computed for each batch are accumulated
  per observed class across the epoch, then turned into the estimate.
* repredict: the model re-predicts the full training set at epoch end and
  the estimate comes from that single fresh pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .criteria import (
    ConfidenceAccumulator,
    PenaltyLabelSet,
    criteria_all,
    criteria_ol,
    criteria_pl,
    descending_order,
    estimate_penalty_labels,
)
from .data import LabeledDataset, epoch_batches
from .losses import SlConfig, ce_grad_logits, sl_grad_logits
from .metrics import RunRecord, test_error
from .network import GradFn, LrSchedule, MomentumSgd, Mlp
from .noise import NoiseSpec, build_transition, corrupt_labels
from .seeding import INIT_STREAM, NOISE_STREAM, SHUFFLE_STREAM

PREDICT_CHUNK = 4096


class Variant(str, Enum):
    """Which score drives selection; NONE disables selection entirely."""

    NONE = "none"
    OL = "ol"
    PL = "pl"
    ALL = "all"


class PenaltyUpdate(str, Enum):
    STACKED = "stacked"
    REPREDICT = "repredict"


class LossKind(str, Enum):
    CE = "ce"
    SL = "sl"


@dataclass(frozen=True)
class CriteriaConfig:
    variant: Variant = Variant.ALL
    lam: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    """Everything one run needs besides the data itself.

    ``select_fraction`` is the percentage of each batch kept once selection
    starts; leave it None to derive 100 * (1 - epsilon) from the noise spec.
    """

    epochs: int = 100
    warmup_epochs: int = 25
    batch_size: int = 128
    select_fraction: float | None = None
    hidden: tuple[int, ...] = (64, 64)
    learning_rate: float = 0.1
    lr_milestones: tuple[tuple[int, float], ...] = ((50, 0.2), (75, 0.2))
    momentum: float = 0.9
    criteria: CriteriaConfig = field(default_factory=CriteriaConfig)
    penalty_update: PenaltyUpdate = PenaltyUpdate.STACKED
    loss: LossKind = LossKind.CE
    sl: SlConfig = field(default_factory=SlConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "penalty_update", PenaltyUpdate(self.penalty_update))
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(
            self, "lr_milestones", tuple((int(e), float(m)) for e, m in self.lr_milestones)
        )
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        # warmup may equal epochs: that run never selects and must match a
        # plain run exactly.
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError("warmup_epochs must be in [0, epochs]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.select_fraction is not None and not 0.0 < self.select_fraction <= 100.0:
            raise ValueError("select_fraction must be in (0, 100]")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")


@dataclass(frozen=True)
class SelectionOutcome:
    """Indices kept from one batch, ascending, plus the scores they beat."""

    selected_indices: np.ndarray
    scores: np.ndarray
    criteria_used: Variant | None = None


def select_top_r(
    scores: np.ndarray, r_percent: float, criteria_used: Variant | None = None
) -> SelectionOutcome:
    """Keep the ceil(n * r / 100) highest-scoring indices, never fewer than 1.

    Ties break toward the lower original index. Returned indices are sorted
    ascending so downstream gradient math runs in a canonical order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty 1-d array")
    if not 0.0 < r_percent <= 100.0:
        raise ValueError("r_percent must be in (0, 100]")
    n = scores.size
    count = min(n, max(1, math.ceil(n * r_percent / 100.0)))
    chosen = np.sort(descending_order(scores)[:count])
    return SelectionOutcome(chosen, scores, criteria_used)


def batch_scores(
    variant: Variant,
    confidences: np.ndarray,
    observed_onehot: np.ndarray,
    penalty_rows: np.ndarray,
    lam: float,
) -> np.ndarray:
    """Selection score under the given variant, higher meaning cleaner.

    The penalty-only variant keeps the samples least aligned with their
    penalty label, hence the sign flip.
    """
    if variant is Variant.OL:
        return criteria_ol(confidences, observed_onehot)
    if variant is Variant.PL:
        return -criteria_pl(confidences, penalty_rows)
    if variant is Variant.ALL:
        return criteria_all(confidences, observed_onehot, penalty_rows, lam)
    raise ValueError(f"variant {variant} does not score batches")


@dataclass
class TrainState:
    """Mutable state threaded through the epoch loop."""

    net: Mlp
    opt: MomentumSgd
    acc: ConfidenceAccumulator
    penalty: PenaltyLabelSet


@dataclass(frozen=True)
class EpochStats:
    train_selected: int
    precision: float | None
    selected_per_class: tuple[int, ...]


@dataclass(frozen=True)
class RunResult:
    records: tuple[RunRecord, ...]
    penalty_history: tuple[PenaltyLabelSet, ...]

    @property
    def best_test_error(self) -> float:
        return min(r.test_error for r in self.records)

    @property
    def final(self) -> RunRecord:
        return self.records[-1]


def _initial_penalty(k: int) -> PenaltyLabelSet:
    """Placeholder before the first estimate: uniform, flagged as fallback."""
    labels = np.full((k, k), 1.0 / (k - 1))
    np.fill_diagonal(labels, 0.0)
    return PenaltyLabelSet(labels, -1, np.ones(k, dtype=bool))


def init_state(config: TrainConfig, d: int, k: int) -> TrainState:
    net = Mlp((d, *config.hidden, k), seed=(config.seed, INIT_STREAM))
    opt = MomentumSgd(
        net, config.momentum, LrSchedule(config.learning_rate, config.lr_milestones)
    )
    return TrainState(net, opt, ConfidenceAccumulator(k), _initial_penalty(k))


def _grad_fn(config: TrainConfig) -> GradFn:
    if config.loss is LossKind.CE:
        return ce_grad_logits
    return lambda probs, onehot: sl_grad_logits(probs, onehot, config.sl)


def predict_in_chunks(net: Mlp, features: np.ndarray) -> np.ndarray:
    parts = [
        net.confidences(features[i : i + PREDICT_CHUNK])
        for i in range(0, features.shape[0], PREDICT_CHUNK)
    ]
    return np.concatenate(parts, axis=0)


def train_epoch(
    state: TrainState, dataset: LabeledDataset, config: TrainConfig, epoch: int
) -> EpochStats:
    """Run one epoch in place and refresh the penalty estimate at its end.

    Consumed penalty labels must carry the previous epoch's stamp; anything
    else means the update order broke, and the epoch refuses to run.
    """
    k = dataset.k
    variant = config.criteria.variant
    selecting = epoch >= config.warmup_epochs and variant is not Variant.NONE
    if selecting and config.select_fraction is None:
        raise ValueError("select_fraction is unset; resolve it before training")
    if selecting and variant in (Variant.PL, Variant.ALL):
        if state.penalty.epoch_of_estimate != epoch - 1:
            raise RuntimeError(
                f"penalty labels stamped {state.penalty.epoch_of_estimate} "
                f"consumed in epoch {epoch}"
            )

    onehot = np.eye(k)[dataset.observed_labels]
    grad_fn = _grad_fn(config)
    total_selected = 0
    clean_selected = 0
    per_class = np.zeros(k, dtype=np.int64)

    for batch in epoch_batches(dataset, config.batch_size, (config.seed, SHUFFLE_STREAM), epoch):
        x = dataset.features[batch]
        confidences = state.net.confidences(x)
        if config.penalty_update is PenaltyUpdate.STACKED:
            state.acc.stack_confidences(confidences, dataset.observed_labels[batch])
        if selecting:
            scores = batch_scores(
                variant,
                confidences,
                onehot[batch],
                state.penalty.labels[dataset.observed_labels[batch]],
                config.criteria.lam,
            )
            outcome = select_top_r(scores, config.select_fraction, variant)
            chosen = batch[outcome.selected_indices]
            total_selected += chosen.size
            clean_selected += int(dataset.clean_mask[chosen].sum())
            per_class += np.bincount(dataset.observed_labels[chosen], minlength=k)
        else:
            chosen = batch
        grads = state.net.backward(dataset.features[chosen], onehot[chosen], grad_fn)
        state.opt.step(state.net, grads, epoch)

    if config.penalty_update is PenaltyUpdate.STACKED:
        state.penalty = estimate_penalty_labels(state.acc, epoch)
        state.acc.reset()
    else:
        fresh = ConfidenceAccumulator(k)
        fresh.stack_confidences(
            predict_in_chunks(state.net, dataset.features), dataset.observed_labels
        )
        state.penalty = estimate_penalty_labels(fresh, epoch)

    if selecting:
        return EpochStats(
            total_selected,
            clean_selected / total_selected if total_selected else None,
            tuple(int(c) for c in per_class),
        )
    counts = np.bincount(dataset.observed_labels, minlength=k)
    return EpochStats(dataset.n, None, tuple(int(c) for c in counts))


def resolve_select_fraction(config: TrainConfig, noise_spec: NoiseSpec) -> float:
    """Configured fraction, or 100 * (1 - epsilon) when left unset."""
    if config.select_fraction is not None:
        return config.select_fraction
    return 100.0 * (1.0 - noise_spec.epsilon)


def run_experiment(
    config: TrainConfig,
    train_clean: LabeledDataset,
    test: LabeledDataset,
    noise_spec: NoiseSpec,
) -> RunResult:
    """Corrupt, train, and record one full run.

    The corruption draw is keyed by the run seed alone, so runs that share a
    seed see the same noisy labels no matter which variant they train.
    Returns per-epoch records plus every penalty estimate along the way.
    """
    matrix = build_transition(noise_spec, train_clean.k)
    noisy = corrupt_labels(train_clean, matrix, (config.seed, NOISE_STREAM))
    resolved = replace(config, select_fraction=resolve_select_fraction(config, noise_spec))
    state = init_state(resolved, train_clean.d, train_clean.k)

    records: list[RunRecord] = []
    history: list[PenaltyLabelSet] = []
    for epoch in range(resolved.epochs):
        stats = train_epoch(state, noisy, resolved, epoch)
        history.append(state.penalty)
        predictions = np.argmax(predict_in_chunks(state.net, test.features), axis=1)
        records.append(
            RunRecord(
                epoch=epoch,
                test_error=test_error(predictions, test.true_labels),
                precision=stats.precision,
                train_selected=stats.train_selected,
                selected_per_class=stats.selected_per_class,
                lam=resolved.criteria.lam,
                seed=resolved.seed,
                variant=resolved.criteria.variant.value,
            )
        )
    return RunResult(tuple(records), tuple(history))
