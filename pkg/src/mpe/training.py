"""Training loops, the pretrain/fine-tune regime, and evaluation reports.

A Trainer owns one optimizer and two seeded random streams (shuffling and
dropout) that persist across phases, so running a pretrain phase followed by
a fine-tune phase on the same data is bitwise equivalent to one long run.
Items are processed one at a time; a batch is a gradient-accumulation group
whose mean loss drives a single Adam step, which computes the exact
mini-batch gradient without any sequence padding.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .autodiff import Adam, Tape, Tensor, cross_entropy, scale, save_checkpoint
from .dataset import Item, LABELS, SpePair, label_index
from .models import (
    ARCHITECTURES,
    AttentionModel,
    ConditionalLstmModel,
    SumOfExpertsModel,
    concat_premises,
)
from .text import Sentence, tokenize


def _tokens(text: "Sentence | str") -> tuple[str, ...]:
    """A normalized sentence already carries its tokens; raw strings don't."""
    return text.tokens if isinstance(text, Sentence) else tokenize(text)

REGIMES = ("single", "pretrain-then-finetune")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    model: str = "conditional-lstm"
    state_dim: int = 75
    embedding_dim: int = 50
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.001
    keep_prob: float = 0.8
    seed: int = 0
    regime: str = "single"
    trainable_embeddings: bool = True

    def __post_init__(self) -> None:
        if self.model not in ARCHITECTURES:
            raise ValueError(f"unknown model {self.model!r}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError(f"keep_prob must lie in (0, 1], got {self.keep_prob}")
        if self.state_dim < 1 or self.embedding_dim < 1:
            raise ValueError("state_dim and embedding_dim must be >= 1")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")


PRESETS: dict[str, TrainConfig] = {
    "lstm-mpe": TrainConfig(model="conditional-lstm", state_dim=75, keep_prob=0.8),
    "se-mpe": TrainConfig(model="sum-of-experts", state_dim=100, keep_prob=0.8),
    "attn-mpe": TrainConfig(model="attention", state_dim=100, keep_prob=0.6),
    "snli-pretrain": TrainConfig(
        model="conditional-lstm",
        state_dim=100,
        keep_prob=0.8,
        regime="pretrain-then-finetune",
    ),
}


def item_id(item: "Item | SpePair") -> str:
    return item.id


def item_gold(item: "Item | SpePair") -> str | None:
    if isinstance(item, Item):
        return item.gold_label
    if isinstance(item, SpePair):
        return item.label
    raise TypeError(f"not a trainable item: {type(item).__name__}")


def vocabulary_from_items(items: Iterable["Item | SpePair"]) -> list[str]:
    """Sorted token set over every premise and hypothesis."""
    tokens: set[str] = set()
    for item in items:
        premises = item.premises if isinstance(item, Item) else (item.premise,)
        for text in (*premises, item.hypothesis):
            tokens.update(_tokens(text))
    return sorted(tokens)


def forward_logits(
    model,
    item: "Item | SpePair",
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run any architecture on a labeled item, returning its 3 logits."""
    if isinstance(item, Item):
        premises = [list(_tokens(p)) for p in item.premises]
    elif isinstance(item, SpePair):
        premises = [list(_tokens(item.premise))]
    else:
        raise TypeError(f"cannot train on {type(item).__name__}")
    hypothesis = list(_tokens(item.hypothesis))
    if isinstance(model, SumOfExpertsModel):
        logits, _ = model.forward(premises, hypothesis, train=train, rng=rng)
    elif isinstance(model, AttentionModel):
        joined = concat_premises(premises)
        logits, _ = model.forward(joined, hypothesis, train=train, rng=rng)
    else:
        joined = concat_premises(premises)
        logits = model.forward(joined, hypothesis, train=train, rng=rng)
    return logits


def predict(model, item: "Item | SpePair") -> str:
    logits = forward_logits(model, item)
    return LABELS[int(np.argmax(logits.values))]


def accuracy(model, items: Sequence["Item | SpePair"]) -> float:
    if not items:
        raise ValueError("cannot score an empty dataset")
    correct = sum(predict(model, item) == item_gold(item) for item in items)
    return correct / len(items)


def build_model(config: TrainConfig, vocab_tokens: Sequence[str], embeddings=None):
    rng = np.random.default_rng(config.seed)
    return ARCHITECTURES[config.model].init(
        vocab_tokens=vocab_tokens,
        dim=embeddings.dim if embeddings is not None else config.embedding_dim,
        state_dim=config.state_dim,
        rng=rng,
        keep_prob=config.keep_prob,
        trainable_embeddings=config.trainable_embeddings,
        embeddings=embeddings,
    )


@dataclass(frozen=True)
class EpochLog:
    """One line of the training log."""

    phase: str
    epoch: int
    train_loss: float
    train_accuracy: float
    dev_accuracy: float | None

    def to_record(self) -> dict:
        return {
            "phase": self.phase,
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "dev_accuracy": self.dev_accuracy,
        }


@dataclass
class TrainResult:
    """Final model plus the per-epoch log and the retained best snapshot."""

    model: "ConditionalLstmModel | AttentionModel | SumOfExpertsModel"
    logs: tuple[EpochLog, ...]
    best_phase: str
    best_epoch: int
    best_params: dict[str, np.ndarray]

    def save_best_checkpoint(self, path) -> None:
        save_checkpoint(path, self.best_params, self.model._meta())


class Trainer:
    """Serial mini-batch optimizer state shared across training phases."""

    def __init__(self, model, config: TrainConfig):
        self.model = model
        self.config = config
        self.optimizer = Adam(model.params(), lr=config.learning_rate)
        self._shuffle = random.Random(config.seed)
        self._dropout_rng = np.random.default_rng(config.seed)
        self.logs: list[EpochLog] = []
        self._best_metric: float | None = None
        self.best_phase = ""
        self.best_epoch = 0
        self.best_params: dict[str, np.ndarray] = {}

    def _check_labeled(self, items: Sequence["Item | SpePair"]) -> None:
        if not items:
            raise ValueError("cannot train on an empty dataset")
        for item in items:
            if item_gold(item) is None:
                raise ValueError(f"item {item_id(item)} has no gold label")

    def _snapshot(self, phase: str, epoch: int, metric: float) -> None:
        if self._best_metric is None or metric > self._best_metric:
            self._best_metric = metric
            self.best_phase = phase
            self.best_epoch = epoch
            self.best_params = {
                name: t.values.copy() for name, t in self.model.all_tensors().items()
            }

    def run(
        self,
        items: Sequence["Item | SpePair"],
        epochs: int,
        dev: Sequence["Item | SpePair"] | None = None,
        phase: str = "train",
    ) -> list[EpochLog]:
        self._check_labeled(items)
        if dev:
            self._check_labeled(dev)
        batch_size = self.config.batch_size
        phase_logs: list[EpochLog] = []
        for epoch in range(1, epochs + 1):
            order = list(range(len(items)))
            self._shuffle.shuffle(order)
            losses: list[float] = []
            for start in range(0, len(order), batch_size):
                chunk = order[start : start + batch_size]
                self.optimizer.zero_grad()
                for idx in chunk:
                    item = items[idx]
                    with Tape() as tape:
                        logits = forward_logits(
                            self.model, item, train=True, rng=self._dropout_rng
                        )
                        loss = cross_entropy(logits, label_index(item_gold(item)))
                        scaled = scale(loss, 1.0 / len(chunk))
                    tape.backward(scaled)
                    losses.append(float(loss.values))
                for p in self.optimizer.params:
                    # A parameter no batch item touched has an exactly-zero
                    # gradient; Adam requires it spelled out.
                    if p.grad is None:
                        p.grad = np.zeros_like(p.values)
                self.optimizer.step()
            train_loss = float(np.mean(losses))
            train_acc = accuracy(self.model, items)
            dev_acc = accuracy(self.model, dev) if dev else None
            log = EpochLog(phase, epoch, train_loss, train_acc, dev_acc)
            phase_logs.append(log)
            self.logs.append(log)
            # Best-epoch retention: dev accuracy when available, else train loss.
            self._snapshot(phase, epoch, dev_acc if dev else -train_loss)
        return phase_logs

    def result(self) -> TrainResult:
        return TrainResult(
            model=self.model,
            logs=tuple(self.logs),
            best_phase=self.best_phase,
            best_epoch=self.best_epoch,
            best_params=self.best_params,
        )


def train(
    items: Sequence["Item | SpePair"],
    config: TrainConfig,
    dev: Sequence["Item | SpePair"] | None = None,
    model=None,
) -> TrainResult:
    """Single-phase run; builds the model from the training vocabulary."""
    if model is None:
        model = build_model(config, vocabulary_from_items(items))
    trainer = Trainer(model, config)
    trainer.run(items, config.epochs, dev=dev, phase="train")
    return trainer.result()


def pretrain_finetune(
    pretrain_items: Sequence["Item | SpePair"],
    finetune_items: Sequence["Item | SpePair"],
    config: TrainConfig,
    dev: Sequence["Item | SpePair"] | None = None,
    model=None,
) -> TrainResult:
    """Two sequential phases sharing one optimizer and random streams."""
    if model is None:
        vocab = vocabulary_from_items(list(pretrain_items) + list(finetune_items))
        model = build_model(config, vocab)
    trainer = Trainer(model, config)
    trainer.run(pretrain_items, config.epochs, dev=dev, phase="pretrain")
    trainer.run(finetune_items, config.epochs, dev=dev, phase="finetune")
    return trainer.result()


# --- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class Breakdown:
    """Accuracy over one subset of the evaluation data."""

    correct: int
    total: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.total if self.total else None


@dataclass(frozen=True)
class EvalReport:
    """Accuracy plus per-class, per-agreement, and per-phenomenon views.

    Subsets that partition the data (classes; agreement categories when every
    item carries pair labels) have weighted-mean accuracy equal to the
    overall accuracy.
    """

    n_items: int
    correct: int
    per_class: Mapping[str, Breakdown]
    by_category: Mapping[int, Breakdown] | None
    by_phenomenon: Mapping[str, Breakdown]
    confusion: tuple[tuple[int, ...], ...]
    predictions: tuple[str, ...]
    diagnostics: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        return self.correct / self.n_items

    def to_record(self) -> dict:
        return {
            "n_items": self.n_items,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "per_class": {
                label: {
                    "correct": b.correct,
                    "total": b.total,
                    "accuracy": b.accuracy,
                }
                for label, b in self.per_class.items()
            },
            "by_category": None
            if self.by_category is None
            else {
                str(cat): {
                    "correct": b.correct,
                    "total": b.total,
                    "accuracy": b.accuracy,
                }
                for cat, b in self.by_category.items()
            },
            "by_phenomenon": {
                tag: {
                    "correct": b.correct,
                    "total": b.total,
                    "accuracy": b.accuracy,
                }
                for tag, b in self.by_phenomenon.items()
            },
            "confusion": [list(row) for row in self.confusion],
            "labels": list(LABELS),
            "diagnostics": list(self.diagnostics),
        }


def evaluate(model, items: Sequence[Item]) -> EvalReport:
    """Score a labeled dataset with dropout off; never mutates parameters."""
    from .voting import pair_agreement_category

    if not items:
        raise ValueError("cannot evaluate an empty dataset")
    for item in items:
        if item_gold(item) is None:
            raise ValueError(f"item {item_id(item)} has no gold label")

    predictions = []
    confusion = [[0] * len(LABELS) for _ in LABELS]
    class_counts = {label: [0, 0] for label in LABELS}
    category_counts = {cat: [0, 0] for cat in range(5)}
    phenomenon_counts: dict[str, list[int]] = {}
    missing_pairs = 0
    diagnostics: list[str] = []

    for item in items:
        gold = item_gold(item)
        guess = predict(model, item)
        predictions.append(guess)
        hit = guess == gold
        confusion[label_index(gold)][label_index(guess)] += 1
        class_counts[gold][0] += hit
        class_counts[gold][1] += 1
        pair_labels = getattr(item, "pair_labels", None)
        if pair_labels is None:
            missing_pairs += 1
        else:
            cat = pair_agreement_category(pair_labels, gold)
            category_counts[cat][0] += hit
            category_counts[cat][1] += 1
        for tag in sorted(getattr(item, "phenomenon_tags", ()) or ()):
            bucket = phenomenon_counts.setdefault(tag, [0, 0])
            bucket[0] += hit
            bucket[1] += 1

    by_category: dict[int, Breakdown] | None
    if missing_pairs:
        by_category = None
        diagnostics.append(
            f"pair-agreement breakdown skipped: {missing_pairs} of "
            f"{len(items)} items lack pair labels"
        )
    else:
        by_category = {
            cat: Breakdown(*counts) for cat, counts in category_counts.items()
        }
    if not phenomenon_counts:
        diagnostics.append("phenomenon breakdown skipped: no tagged items")

    return EvalReport(
        n_items=len(items),
        correct=sum(row[label_index(label)] for label, row in zip(LABELS, confusion)),
        per_class={label: Breakdown(*class_counts[label]) for label in LABELS},
        by_category=by_category,
        by_phenomenon={
            tag: Breakdown(*counts)
            for tag, counts in sorted(phenomenon_counts.items())
        },
        confusion=tuple(tuple(row) for row in confusion),
        predictions=tuple(predictions),
        diagnostics=tuple(diagnostics),
    )


def format_eval_report(report: EvalReport) -> str:
    """Aligned text rendering of an EvalReport."""

    def pct(value: float | None) -> str:
        return "   -" if value is None else f"{100 * value:5.1f}%"

    lines = [
        f"items: {report.n_items}",
        f"accuracy: {pct(report.accuracy)} ({report.correct}/{report.n_items})",
        "",
        "per class:",
    ]
    for label in LABELS:
        b = report.per_class[label]
        lines.append(f"  {label}: {pct(b.accuracy)} ({b.correct}/{b.total})")
    lines.append("")
    if report.by_category is None:
        lines.append("pair-agreement categories: (skipped)")
    else:
        lines.append("pair-agreement categories:")
        for cat in range(5):
            b = report.by_category[cat]
            lines.append(f"  {cat}: {pct(b.accuracy)} ({b.correct}/{b.total})")
    if report.by_phenomenon:
        lines.append("")
        lines.append("phenomena:")
        width = max(len(tag) for tag in report.by_phenomenon)
        for tag, b in report.by_phenomenon.items():
            lines.append(
                f"  {tag:<{width}}: {pct(b.accuracy)} ({b.correct}/{b.total})"
            )
    lines.append("")
    lines.append("confusion (rows gold, cols predicted " + "/".join(LABELS) + "):")
    for label, row in zip(LABELS, report.confusion):
        cells = " ".join(f"{n:5d}" for n in row)
        lines.append(f"  {label} {cells}")
    for note in report.diagnostics:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"
