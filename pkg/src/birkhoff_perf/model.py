"""Aesthetic model: four logistic regressors feeding an order/complexity ratio.

    M = (w1*H + w2*S + theta1) / (w3*C + w4*R + theta2)

H, S, C, R are the pre-sigmoid logits of regressors trained to tell human
renditions (1) from deadpan score renditions (0). The scalar M is turned
into three class logits by per-class affine heads ``a_k * M + b_k`` and a
softmax, and every parameter is fitted by full-batch gradient descent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, MissingClass, NonFiniteLoss, SingleClass
from .features import BasicFeatures

CLASS_NAMES = ("score", "ai", "human")
AESTHETIC_NAMES = ("harmony", "symmetry", "chaos", "redundancy")
AESTHETIC_GROUPS = {
    "harmony": ("pd", "rd", "dh"),
    "symmetry": ("bs", "ds"),
    "chaos": ("phe", "rhe", "adc", "tv"),
    "redundancy": ("kc",),
}
FORMAT_VERSION = 1
STD_FLOOR = 1e-8
# |denominator| below this is clamped; the logits are signed, so a small floor
# lets the denominator sweep through zero and blow up M during training
DEFAULT_DENOM_FLOOR = 2.0
PARAM_NAMES = (
    "w1", "w2", "w3", "w4", "theta1", "theta2",
    "a_score", "a_ai", "a_human", "b_score", "b_ai", "b_human",
)  # fmt: skip
# which measure weight each aesthetic term owns
_TERM_PARAM = {"harmony": 0, "symmetry": 1, "chaos": 2, "redundancy": 3}


@dataclass
class Regressor:
    input_features: tuple[str, ...]
    weights: np.ndarray
    bias: float
    norm_mean: np.ndarray
    norm_std: np.ndarray
    zero_variance: tuple[str, ...] = ()
    loss_history: list[float] = field(default_factory=list, repr=False)

    def logit(self, x: np.ndarray) -> np.ndarray:
        """Raw feature rows (or one row) -> pre-sigmoid score."""
        z = (np.asarray(x, dtype=float) - self.norm_mean) / self.norm_std
        return z @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {
            "input_features": list(self.input_features),
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "norm_mean": [float(v) for v in self.norm_mean],
            "norm_std": [float(v) for v in self.norm_std],
            "zero_variance": list(self.zero_variance),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Regressor":
        return cls(
            input_features=tuple(d["input_features"]),
            weights=np.array(d["weights"], dtype=float),
            bias=float(d["bias"]),
            norm_mean=np.array(d["norm_mean"], dtype=float),
            norm_std=np.array(d["norm_std"], dtype=float),
            zero_variance=tuple(d.get("zero_variance", ())),
        )


@dataclass(frozen=True)
class AestheticFeatures:
    h: float
    s: float
    c: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.s, self.c, self.r])


@dataclass
class MeasureParams:
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0
    theta1: float = 0.0
    theta2: float = 1.0
    head_slopes: tuple[float, float, float] = (-1.0, 0.0, 1.0)
    head_biases: tuple[float, float, float] = (0.0, 0.0, 0.0)
    denom_floor: float = DEFAULT_DENOM_FLOOR

    def __post_init__(self):
        if not self.denom_floor > 0:
            raise DataError("denom_floor must be positive")

    def to_vector(self) -> np.ndarray:
        return np.array(
            [self.w1, self.w2, self.w3, self.w4, self.theta1, self.theta2,
             *self.head_slopes, *self.head_biases], dtype=float,
        )  # fmt: skip

    @classmethod
    def from_vector(cls, v: Sequence[float], denom_floor: float = DEFAULT_DENOM_FLOOR) -> "MeasureParams":
        v = [float(x) for x in v]
        return cls(*v[:6], head_slopes=tuple(v[6:9]), head_biases=tuple(v[9:12]),
                   denom_floor=denom_floor)  # fmt: skip

    def to_dict(self) -> dict:
        return {
            "w1": self.w1, "w2": self.w2, "w3": self.w3, "w4": self.w4,
            "theta1": self.theta1, "theta2": self.theta2,
            "head_slopes": list(self.head_slopes), "head_biases": list(self.head_biases),
            "denom_floor": self.denom_floor,
        }  # fmt: skip

    @classmethod
    def from_dict(cls, d: dict) -> "MeasureParams":
        return cls(
            d["w1"], d["w2"], d["w3"], d["w4"], d["theta1"], d["theta2"],
            head_slopes=tuple(d["head_slopes"]), head_biases=tuple(d["head_biases"]),
            denom_floor=d["denom_floor"],
        )  # fmt: skip


@dataclass
class TrainedModel:
    regressors: dict[str, Regressor]
    measure: MeasureParams
    class_names: tuple[str, ...] = CLASS_NAMES
    training_meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format_version": FORMAT_VERSION,
            "class_names": list(self.class_names),
            "regressors": {name: self.regressors[name].to_dict() for name in AESTHETIC_NAMES},
            "measure": self.measure.to_dict(),
            "training_meta": self.training_meta,
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from exc
        if doc.get("format_version") != FORMAT_VERSION:
            raise DataError(f"unsupported model format_version {doc.get('format_version')!r}")
        try:
            return cls(
                regressors={k: Regressor.from_dict(v) for k, v in doc["regressors"].items()},
                measure=MeasureParams.from_dict(doc["measure"]),
                class_names=tuple(doc["class_names"]),
                training_meta=doc.get("training_meta", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model file: {exc}") from exc


# --- regressors ---------------------------------------------------------------------


def _bce(logits: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def fit_regressor(
    samples: Sequence[BasicFeatures],
    labels: Sequence[int],
    feature_subset: Sequence[str],
    lr: float = 0.01,
    iterations: int = 1000,
    seed: int = 0,
) -> Regressor:
    """Z-score the chosen features and fit a logistic regression by
    full-batch gradient descent from zero weights.

    ``seed`` is accepted for interface symmetry; the fit is deterministic.
    """
    y = np.asarray(labels, dtype=float)
    if not np.isin(y, (0, 1)).all():
        raise DataError("regressor labels must be 0 or 1")
    if min((y == 0).sum(), (y == 1).sum()) < 2:
        raise SingleClass("need at least 2 samples of each class")
    names = tuple(feature_subset)
    x = np.array([f.as_array(names) for f in samples])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    degenerate = tuple(n for n, s in zip(names, std) if s < STD_FLOOR)
    std = np.where(std < STD_FLOOR, STD_FLOOR, std)
    z = (x - mean) / std

    w = np.zeros(len(names))
    b = 0.0
    n = len(y)
    history = []
    for _ in range(iterations):
        logits = z @ w + b
        history.append(_bce(logits, y))
        residual = _sigmoid(logits) - y
        w = w - lr * (z.T @ residual) / n
        b = b - lr * residual.mean()
    history.append(_bce(z @ w + b, y))
    if not np.isfinite(history[-1]):
        raise NonFiniteLoss(f"regressor loss became {history[-1]}")
    return Regressor(names, w, float(b), mean, std, degenerate, history)


def fit_regressors(
    samples: Sequence[BasicFeatures], labels: Sequence[str], lr: float = 0.01,
    iterations: int = 1000, seed: int = 0,
) -> dict[str, Regressor]:  # fmt: skip
    """Fit all four regressors on the human (1) vs. score (0) samples; AI
    samples are left out."""
    keep = [k for k, lab in enumerate(labels) if lab in ("score", "human")]
    xs = [samples[k] for k in keep]
    ys = [1 if labels[k] == "human" else 0 for k in keep]
    return {
        name: fit_regressor(xs, ys, AESTHETIC_GROUPS[name], lr, iterations, seed)
        for name in AESTHETIC_NAMES
    }


def aesthetic_features(f: BasicFeatures, regressors: dict[str, Regressor]) -> AestheticFeatures:
    h, s, c, r = (float(regressors[name].logit(f.as_array(AESTHETIC_GROUPS[name])))
                  for name in AESTHETIC_NAMES)  # fmt: skip
    return AestheticFeatures(h, s, c, r)


def aesthetic_matrix(samples: Sequence[BasicFeatures], regressors: dict[str, Regressor]) -> np.ndarray:
    """N x 4 matrix of (H, S, C, R)."""
    cols = []
    for name in AESTHETIC_NAMES:
        x = np.array([f.as_array(AESTHETIC_GROUPS[name]) for f in samples])
        cols.append(regressors[name].logit(x))
    return np.column_stack(cols)


# --- measure -------------------------------------------------------------------------


def _floored(den: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    hit = np.abs(den) < floor
    sign = np.where(den < 0, -1.0, 1.0)
    return np.where(hit, sign * floor, den), hit


def measure_values(a: np.ndarray, params: np.ndarray, floor: float) -> np.ndarray:
    a = np.atleast_2d(a)
    num = params[0] * a[:, 0] + params[1] * a[:, 1] + params[4]
    den, _ = _floored(params[2] * a[:, 2] + params[3] * a[:, 3] + params[5], floor)
    return num / den


def aesthetic_measure(a: AestheticFeatures, p: MeasureParams) -> float:
    return float(measure_values(a.as_array(), p.to_vector(), p.denom_floor)[0])


def _log_softmax(z: np.ndarray) -> np.ndarray:
    return z - np.logaddexp.reduce(z, axis=1, keepdims=True)


def class_logits(m: np.ndarray, params: np.ndarray) -> np.ndarray:
    return np.outer(m, params[6:9]) + params[9:12]


def measure_loss(a: np.ndarray, y: np.ndarray, params: np.ndarray, floor: float) -> float:
    logp = _log_softmax(class_logits(measure_values(a, params, floor), params))
    return float(-np.mean(logp[np.arange(len(y)), y]))


def measure_loss_and_grad(
    a: np.ndarray, y: np.ndarray, params: np.ndarray, floor: float
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the 12 parameters.

    Where the denominator is floored its gradient is taken as zero.
    """
    hh, ss, cc, rr = a.T
    num = params[0] * hh + params[1] * ss + params[4]
    den, hit = _floored(params[2] * cc + params[3] * rr + params[5], floor)
    m = num / den
    logp = _log_softmax(class_logits(m, params))
    n = len(y)
    loss = float(-np.mean(logp[np.arange(n), y]))

    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    dm = dz @ params[6:9]
    dnum = dm / den
    dden = np.where(hit, 0.0, -dm * num / den**2)
    grad = np.array([
        dnum @ hh, dnum @ ss, dden @ cc, dden @ rr, dnum.sum(), dden.sum(),
        *(dz * m[:, None]).sum(axis=0), *dz.sum(axis=0),
    ])  # fmt: skip
    return loss, grad


def initial_theta2(a: np.ndarray, params: np.ndarray) -> float:
    """Smallest theta2 >= 1 with w3*C + w4*R + theta2 >= 1 on every row."""
    a = np.atleast_2d(a)
    low = float(np.min(params[2] * a[:, 2] + params[3] * a[:, 3]))
    return max(1.0, 1.0 - low)


def train_measure(
    a: np.ndarray,
    labels: Sequence[int],
    lr: float = 0.01,
    iterations: int = 1000,
    frozen: Sequence[str] = (),
    init: MeasureParams | None = None,
) -> tuple[MeasureParams, list[float]]:
    """Fit measure weights, constants and class heads by gradient descent.

    ``labels`` are class indices into CLASS_NAMES. ``frozen`` names
    aesthetic terms to drop: their weight is fixed at 0 and never updated.
    Without an explicit ``init``, theta2 starts at 1 or higher, just enough
    that every training denominator starts at 1 or more (see
    ``initial_theta2``). Returns the parameters and the loss history
    (initial ... final).
    """
    y = np.asarray(labels, dtype=int)
    missing = [CLASS_NAMES[k] for k in range(3) if not (y == k).any()]
    if missing:
        raise MissingClass(f"no training samples for class(es): {', '.join(missing)}")
    a = np.asarray(a, dtype=float)
    auto_theta2 = init is None
    init = init or MeasureParams()
    params = init.to_vector()
    floor = init.denom_floor
    mask = np.ones_like(params)
    for term in frozen:
        params[_TERM_PARAM[term]] = 0.0
        mask[_TERM_PARAM[term]] = 0.0
    if auto_theta2:
        params[5] = initial_theta2(a, params)

    history = []
    for step in range(iterations):
        loss, grad = measure_loss_and_grad(a, y, params, floor)
        if not (np.isfinite(loss) and np.isfinite(grad).all()):
            raise NonFiniteLoss(
                f"measure loss became non-finite at iteration {step}: loss={loss}, "
                f"params={dict(zip(PARAM_NAMES, params.round(6)))}"
            )
        history.append(loss)
        params = params - lr * mask * grad
    final = measure_loss(a, y, params, floor)
    if not np.isfinite(final):
        raise NonFiniteLoss(f"final measure loss is {final}")
    history.append(final)
    return MeasureParams.from_vector(params, floor), history


def class_probabilities(m: np.ndarray, p: MeasureParams) -> np.ndarray:
    logp = _log_softmax(class_logits(np.atleast_1d(m), p.to_vector()))
    probs = np.exp(logp)
    return probs / probs.sum(axis=1, keepdims=True)


def predict(f: BasicFeatures, model: TrainedModel) -> tuple[float, np.ndarray, str]:
    """Measure, class probabilities and predicted class (ties -> lower index)."""
    m = aesthetic_measure(aesthetic_features(f, model.regressors), model.measure)
    probs = class_probabilities(np.array([m]), model.measure)[0]
    return m, probs, model.class_names[int(np.argmax(probs))]


def predict_many(samples: Sequence[BasicFeatures], model: TrainedModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized predict: (measures, class indices)."""
    a = aesthetic_matrix(samples, model.regressors)
    m = measure_values(a, model.measure.to_vector(), model.measure.denom_floor)
    probs = class_probabilities(m, model.measure)
    return m, np.argmax(probs, axis=1)


def train_model(
    samples: Sequence[BasicFeatures],
    labels: Sequence[str],
    lr: float = 0.01,
    iterations: int = 1000,
    seed: int = 0,
    ablate: str | None = None,
) -> TrainedModel:
    """Regressors first, then the measure on all three classes."""
    unknown = set(labels) - set(CLASS_NAMES)
    if unknown:
        raise DataError(f"unknown labels: {sorted(unknown)}")
    missing = [c for c in CLASS_NAMES if c not in labels]
    if missing:
        raise MissingClass(f"no training samples for class(es): {', '.join(missing)}")
    if ablate is not None and ablate not in AESTHETIC_NAMES:
        raise DataError(f"cannot ablate {ablate!r}; choose from {AESTHETIC_NAMES}")

    regressors = fit_regressors(samples, labels, lr, iterations, seed)
    a = aesthetic_matrix(samples, regressors)
    y = [CLASS_NAMES.index(lab) for lab in labels]
    measure, history = train_measure(a, y, lr, iterations, frozen=(ablate,) if ablate else ())
    meta = {
        "seed": seed,
        "iterations": iterations,
        "learning_rate": lr,
        "initial_loss": history[0],
        "final_loss": history[-1],
        "loss_checkpoints": {str(k): history[k] for k in range(0, len(history), 100)},
        "regressor_final_loss": {k: r.loss_history[-1] for k, r in regressors.items()},
        "ablate": ablate,
        "n_samples": len(labels),
    }
    return TrainedModel(regressors, measure, CLASS_NAMES, meta)
