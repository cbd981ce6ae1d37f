"""Accuracy, Cohen's kappa, class feature means and the ablation protocol."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyMatrix, MissingClass
from .features import FEATURE_NAMES
from .model import (
    AESTHETIC_NAMES,
    CLASS_NAMES,
    TrainedModel,
    aesthetic_matrix,
    predict_many,
    train_model,
)
from .pipeline import Sample

VARIANTS = ("full", "w/o harmony", "w/o symmetry", "w/o chaos", "w/o redundancy")
MEAN_COLUMNS = ("PD", "RD", "DH", "BS", "DS", "PHE", "RHE", "ADC", "TV", "KC", "H", "S", "C", "R")
# True where larger is aesthetically better
HIGHER_IS_BETTER = dict(zip(MEAN_COLUMNS, (
    False, False, True, False, False, False, False, True, True, False, True, True, True, True,
)))  # fmt: skip


def confusion_matrix(true: Sequence[int], pred: Sequence[int], n_classes: int = 3) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (np.asarray(true, dtype=int), np.asarray(pred, dtype=int)), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise EmptyMatrix("confusion matrix is empty")
    return float(np.trace(cm) / total)


def cohen_kappa(cm: np.ndarray) -> float:
    """Chance-corrected agreement; rows are true classes, columns predictions.

    When chance agreement is 1 (every sample in a single cell) kappa is
    undefined and 0 is returned with a warning.
    """
    cm = np.asarray(cm, dtype=float)
    total = cm.sum()
    if total <= 0:
        raise EmptyMatrix("confusion matrix is empty")
    p_o = np.trace(cm) / total
    p_e = float(cm.sum(axis=1) @ cm.sum(axis=0)) / total**2
    if np.isclose(p_e, 1.0, rtol=0, atol=1e-15):
        warnings.warn("kappa undefined (expected agreement is 1); reporting 0", stacklevel=2)
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass
class Evaluation:
    accuracy: float
    kappa: float
    confusion: np.ndarray
    measures: np.ndarray = field(repr=False)
    predicted: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "kappa": self.kappa,
            "confusion_matrix": self.confusion.tolist(),
            "class_names": list(CLASS_NAMES),
        }


def evaluate(model: TrainedModel, samples: Sequence[Sample]) -> Evaluation:
    if not samples:
        raise EmptyMatrix("no samples to evaluate")
    true = [CLASS_NAMES.index(s.label) for s in samples]
    measures, pred = predict_many([s.features for s in samples], model)
    cm = confusion_matrix(true, pred)
    return Evaluation(accuracy(cm), cohen_kappa(cm), cm, measures, pred)


@dataclass
class FeatureMeans:
    columns: tuple[str, ...]
    higher_is_better: dict[str, bool]
    rows: dict[str, list[float]]
    counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "orientation": {c: ("up" if self.higher_is_better[c] else "down") for c in self.columns},
            "means": self.rows,
            "counts": self.counts,
        }

    def to_text(self) -> str:
        head = ["class"] + [f"{c}{'↑' if self.higher_is_better[c] else '↓'}" for c in self.columns]
        body = [[cls] + [f"{v:.3f}" for v in row] for cls, row in self.rows.items()]
        return format_table(head, body)


def feature_means(
    samples: Sequence[Sample], aesthetic: np.ndarray | None = None
) -> FeatureMeans:
    """Per-class means of the 10 basic features and, when given, the
    N x 4 aesthetic matrix (H, S, C, R); aesthetic columns are NaN otherwise."""
    labels = np.array([s.label for s in samples])
    missing = [c for c in CLASS_NAMES if c not in labels]
    if missing:
        raise MissingClass(f"no samples for class(es): {', '.join(missing)}")
    basic = np.array([s.features.as_array() for s in samples])
    extra = np.asarray(aesthetic) if aesthetic is not None else np.full((len(samples), 4), np.nan)
    table = np.hstack([basic, extra])
    rows = {c: [float(v) for v in table[labels == c].mean(axis=0)] for c in CLASS_NAMES}
    counts = {c: int((labels == c).sum()) for c in CLASS_NAMES}
    return FeatureMeans(MEAN_COLUMNS, HIGHER_IS_BETTER, rows, counts)


def directional_agreement(means: FeatureMeans, reference: dict[str, list[float]]) -> dict[str, bool]:
    """For each basic-feature column: does the class holding the best mean
    (largest for ↑, smallest for ↓) match the reference table's best class?"""
    out = {}
    for k, col in enumerate(MEAN_COLUMNS[: len(FEATURE_NAMES)]):
        pick = max if means.higher_is_better[col] else min
        ours = pick(CLASS_NAMES, key=lambda c: means.rows[c][k])
        theirs = pick(CLASS_NAMES, key=lambda c: reference[c][k])
        out[col] = ours == theirs
    return out


# reference class means on a real piano corpus; only their orientation is compared
REFERENCE_MEANS = {
    "score": [0.09, 0.32, 0.19, 0.76, 0.65, 3.30, 1.62, 0.87, 3.30, 0.77],
    "ai": [0.12, 0.22, 0.56, 0.59, 0.41, 3.29, 1.44, 5.25, 3.20, 0.75],
    "human": [0.13, 0.29, 0.78, 0.33, 0.20, 3.63, 1.01, 10.4, 7.26, 0.72],
}


@dataclass
class AblationReport:
    variants: dict[str, Evaluation]
    models: dict[str, TrainedModel] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {name: ev.to_dict() for name, ev in self.variants.items()}

    def to_text(self) -> str:
        head = ["metric", *self.variants]
        body = [
            ["accuracy", *(f"{ev.accuracy:.3f}" for ev in self.variants.values())],
            ["kappa", *(f"{ev.kappa:.3f}" for ev in self.variants.values())],
        ]
        return format_table(head, body)


def run_ablation(
    train: Sequence[Sample],
    test: Sequence[Sample],
    lr: float = 0.01,
    iterations: int = 1000,
    seed: int = 0,
) -> AblationReport:
    """Full model plus one model per removed aesthetic term, all evaluated on
    the same held-out samples. Variant k is trained with seed ``seed + k``."""
    feats = [s.features for s in train]
    labels = [s.label for s in train]
    variants, models = {}, {}
    for k, (name, term) in enumerate(zip(VARIANTS, (None, *AESTHETIC_NAMES))):
        model = train_model(feats, labels, lr, iterations, seed + k, ablate=term)
        models[name] = model
        variants[name] = evaluate(model, test)
    return AblationReport(variants, models)


def distributions_csv(model: TrainedModel, samples: Sequence[Sample]) -> str:
    """One row per sample: id, class, 10 basic features, H, S, C, R and M."""
    feats = [s.features for s in samples]
    a = aesthetic_matrix(feats, model.regressors)
    measures, _ = predict_many(feats, model)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "class", *FEATURE_NAMES, "H", "S", "C", "R", "M"])
    for s, row, m in zip(samples, a, measures):
        writer.writerow([s.sample_id, s.label, *(repr(float(v)) for v in s.features.as_array()),
                         *(repr(float(v)) for v in row), repr(float(m))])  # fmt: skip
    return buf.getvalue()


def format_table(head: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    rows = [list(head), *[list(r) for r in body]]
    widths = [max(len(r[k]) for r in rows) for k in range(len(head))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"

