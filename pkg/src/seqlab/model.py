"""Interim classifier and iteration bookkeeping.

The model is a multinomial logistic regression over event count features:
one block of per-symbol counts, one block of bigram counts, and, when every
video has an embedding, the embedding itself.  Training is full-batch
gradient descent on the softmax cross-entropy with L2 on the weights
(biases excluded), deterministic under a fixed seed.
"""

from __future__ import annotations

import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .labels import LabelStore
from .types import Dataset, EventSequence, symbol_string

FeatureVector = np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ValueError("invalid training config")


def _embeddings_cover_all(dataset: Dataset) -> bool:
    if not dataset.embeddings:
        return False
    return all(vid in dataset.embeddings for vid in dataset.sequences)


def feature_names(dataset: Dataset) -> list[str]:
    alphabet = dataset.registry.alphabet
    names = [f"count:{a}" for a in alphabet]
    names += [f"bigram:{a}{b}" for a in alphabet for b in alphabet]
    if _embeddings_cover_all(dataset):
        names += [f"emb:{i}" for i in range(dataset.embedding_dim or 0)]
    return names


def featurize(seq: EventSequence, dataset: Dataset) -> FeatureVector:
    """Count block + bigram block (+ embedding block when dataset-complete)."""
    alphabet = dataset.registry.alphabet
    index = {code: i for i, code in enumerate(alphabet)}
    k = len(alphabet)
    counts = np.zeros(k)
    bigrams = np.zeros(k * k)
    s = symbol_string(seq)
    for ch in s:
        counts[index[ch]] += 1
    for a, b in zip(s, s[1:]):
        bigrams[index[a] * k + index[b]] += 1
    blocks = [counts, bigrams]
    if _embeddings_cover_all(dataset):
        blocks.append(np.asarray(dataset.embeddings[seq.video_id], dtype=float))
    return np.concatenate(blocks)


def feature_matrix(ids: Sequence[str], dataset: Dataset) -> np.ndarray:
    missing = [vid for vid in ids if vid not in dataset.sequences]
    if missing:
        raise KeyError(f"unknown video ids {missing}")
    return np.stack([featurize(dataset.sequences[vid], dataset) for vid in ids])


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray,
    biases: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + L2 penalty, with analytic gradients.

    ``y`` holds class indices; ``weights`` is (classes, features).
    """
    n = x.shape[0]
    probs = softmax(x @ weights.T + biases)
    loss = -float(np.log(probs[np.arange(n), y] + 1e-300).mean())
    loss += 0.5 * l2 * float((weights**2).sum())
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = delta.T @ x + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


@dataclass
class Classifier:
    """Linear multinomial model with frozen feature standardization."""

    class_ids: tuple[str, ...]
    weights: np.ndarray
    biases: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    config: TrainConfig

    def _transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self._transform(x) @ self.weights.T + self.biases)

    def predict(self, x: np.ndarray) -> list[str]:
        probs = self.predict_proba(x)
        return [self.class_ids[i] for i in probs.argmax(axis=1)]

    def to_record(self) -> dict:
        return {
            "class_ids": list(self.class_ids),
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "config": {
                "learning_rate": self.config.learning_rate,
                "epochs": self.config.epochs,
                "l2": self.config.l2,
                "seed": self.config.seed,
            },
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "Classifier":
        return cls(
            class_ids=tuple(record["class_ids"]),
            weights=np.asarray(record["weights"], dtype=float),
            biases=np.asarray(record["biases"], dtype=float),
            mean=np.asarray(record["mean"], dtype=float),
            scale=np.asarray(record["scale"], dtype=float),
            config=TrainConfig(**record["config"]),
        )


def train(
    train_ids: Sequence[str],
    labels: Mapping[str, str],
    dataset: Dataset,
    config: TrainConfig | None = None,
) -> Classifier:
    """Fit the classifier on labeled ids.  Deterministic under config.seed."""
    config = config or TrainConfig()
    ids = list(train_ids)
    missing = [vid for vid in ids if vid not in labels]
    if missing:
        raise KeyError(f"train ids without labels: {missing}")
    class_ids = tuple(sorted({labels[vid] for vid in ids}))
    if len(class_ids) < 2:
        raise ValueError(f"training needs >= 2 classes, got {class_ids}")
    class_index = {c: i for i, c in enumerate(class_ids)}
    x_raw = feature_matrix(ids, dataset)
    y = np.array([class_index[labels[vid]] for vid in ids])
    mean = x_raw.mean(axis=0)
    std = x_raw.std(axis=0)
    scale = np.where(std == 0.0, 1.0, std)
    x = (x_raw - mean) / scale
    rng = np.random.default_rng(config.seed)
    weights = rng.normal(scale=0.01, size=(len(class_ids), x.shape[1]))
    biases = np.zeros(len(class_ids))
    for _ in range(config.epochs):
        _, grad_w, grad_b = loss_and_grad(weights, biases, x, y, config.l2)
        weights -= config.learning_rate * grad_w
        biases -= config.learning_rate * grad_b
    return Classifier(
        class_ids=class_ids,
        weights=weights,
        biases=biases,
        mean=mean,
        scale=scale,
        config=config,
    )


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    labeled_count: int
    per_class_accuracy: dict[str, float]
    overall_f1: float
    confusion_matrix: tuple[tuple[int, ...], ...]
    class_ids: tuple[str, ...]
    timestamp: float

    def to_record(self) -> dict:
        return {
            "iteration": self.iteration,
            "labeled_count": self.labeled_count,
            "per_class_accuracy": dict(self.per_class_accuracy),
            "overall_f1": self.overall_f1,
            "confusion_matrix": [list(row) for row in self.confusion_matrix],
            "class_ids": list(self.class_ids),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "IterationRecord":
        return cls(
            iteration=int(record["iteration"]),
            labeled_count=int(record["labeled_count"]),
            per_class_accuracy=dict(record["per_class_accuracy"]),
            overall_f1=float(record["overall_f1"]),
            confusion_matrix=tuple(tuple(int(v) for v in row) for row in record["confusion_matrix"]),
            class_ids=tuple(record["class_ids"]),
            timestamp=float(record["timestamp"]),
        )


def macro_f1(confusion: Sequence[Sequence[int]]) -> float:
    """Macro-averaged F1 from a truth-by-prediction count matrix."""
    k = len(confusion)
    scores = []
    for c in range(k):
        tp = confusion[c][c]
        fn = sum(confusion[c]) - tp
        fp = sum(confusion[r][c] for r in range(k)) - tp
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2 * tp / denom)
    return sum(scores) / len(scores)


def evaluate(
    model: Classifier,
    test_ids: Sequence[str],
    labels: Mapping[str, str],
    dataset: Dataset,
    iteration: int = 0,
    labeled_count: int | None = None,
    clock=time.time,
) -> IterationRecord:
    """Confusion matrix, per-class accuracy, and macro-F1 on labeled test ids."""
    ids = list(test_ids)
    if not ids:
        raise ValueError("evaluate requires a nonempty test set")
    class_ids = tuple(sorted(set(model.class_ids) | {labels[vid] for vid in ids}))
    index = {c: i for i, c in enumerate(class_ids)}
    predictions = model.predict(feature_matrix(ids, dataset))
    k = len(class_ids)
    confusion = [[0] * k for _ in range(k)]
    for vid, predicted in zip(ids, predictions):
        confusion[index[labels[vid]]][index[predicted]] += 1
    per_class = {}
    for c in class_ids:
        row = confusion[index[c]]
        total = sum(row)
        per_class[c] = 0.0 if total == 0 else row[index[c]] / total
    return IterationRecord(
        iteration=iteration,
        labeled_count=len(ids) if labeled_count is None else labeled_count,
        per_class_accuracy=per_class,
        overall_f1=macro_f1(confusion),
        confusion_matrix=tuple(tuple(row) for row in confusion),
        class_ids=class_ids,
        timestamp=clock(),
    )


@dataclass
class ModelLoop:
    """Label-batch-then-retrain driver: owns the iteration counter."""

    dataset: Dataset
    store: LabelStore
    threshold: int = 32
    config: TrainConfig = field(default_factory=TrainConfig)
    eval_labels: Mapping[str, str] | None = None
    classifier: Classifier | None = None
    records: list[IterationRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        self._events_at_retrain = len(self.store.events)

    @property
    def iteration(self) -> int:
        return len(self.records)

    @property
    def new_since_retrain(self) -> int:
        return len(self.store.events) - self._events_at_retrain

    def maybe_retrain(self, force: bool = False) -> tuple[Classifier, IterationRecord] | None:
        """Retrain when enough new labels arrived (or on demand with force)."""
        if not force and self.new_since_retrain < self.threshold:
            return None
        current = self.store.state.current
        train_ids = sorted(current)
        self.classifier = train(train_ids, current, self.dataset, self.config)
        if self.eval_labels is not None:
            eval_ids = sorted(self.eval_labels)
            eval_map: Mapping[str, str] = self.eval_labels
        else:
            eval_ids, eval_map = train_ids, current
        record = evaluate(
            self.classifier,
            eval_ids,
            eval_map,
            self.dataset,
            iteration=self.iteration + 1,
            labeled_count=len(current),
        )
        self.records.append(record)
        self._events_at_retrain = len(self.store.events)
        return self.classifier, record


@dataclass(frozen=True)
class ProjectionMap:
    """2D overview coordinates plus a per-point prediction-error weight."""

    coords: dict[str, tuple[float, float]]
    errors: dict[str, float]


def pca_coords(dataset: Dataset) -> dict[str, tuple[float, float]]:
    """First two principal components of the embeddings, deterministic signs."""
    embeddings = dataset.embeddings or {}
    ids = [vid for vid in dataset.sequences if vid in embeddings]
    if not ids:
        raise ValueError("projection requires embeddings or precomputed coordinates")
    x = np.stack([np.asarray(embeddings[vid], dtype=float) for vid in ids])
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2] if vt.shape[0] >= 2 else np.vstack([vt, np.zeros((2 - vt.shape[0], vt.shape[1]))])
    # Fix the sign convention so results do not flip across BLAS builds.
    for i in range(components.shape[0]):
        pivot = np.argmax(np.abs(components[i]))
        if components[i][pivot] < 0:
            components[i] = -components[i]
    scores = centered @ components.T
    return {vid: (float(scores[i, 0]), float(scores[i, 1])) for i, vid in enumerate(ids)}


def project(
    dataset: Dataset,
    model: Classifier | None = None,
    labels: Mapping[str, str] | None = None,
    precomputed: Mapping[str, tuple[float, float]] | None = None,
) -> ProjectionMap:
    """Overview map: precomputed coordinates win, else principal components.

    Error per point: 1 - p(true class) for labeled ids, 1 - max probability
    for unlabeled ids, 0 without a model.
    """
    if precomputed is not None:
        coords = {vid: (float(x), float(y)) for vid, (x, y) in precomputed.items()}
        unknown = sorted(set(coords) - set(dataset.sequences))
        if unknown:
            raise KeyError(f"precomputed coordinates for unknown ids {unknown}")
    else:
        coords = pca_coords(dataset)
    labels = labels or {}
    errors: dict[str, float] = {}
    ids = sorted(coords)
    if model is None:
        errors = {vid: 0.0 for vid in ids}
    else:
        probs = model.predict_proba(feature_matrix(ids, dataset))
        class_index = {c: i for i, c in enumerate(model.class_ids)}
        for row, vid in zip(probs, ids):
            true_class = labels.get(vid)
            if true_class is not None and true_class in class_index:
                errors[vid] = float(1.0 - row[class_index[true_class]])
            else:
                errors[vid] = float(1.0 - row.max())
    return ProjectionMap(coords=coords, errors=errors)
