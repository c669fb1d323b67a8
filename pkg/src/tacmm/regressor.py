"""Contact depth/angle regressor over tactile pin features.

A single fully connected network ``2M -> H -> 2`` (tanh hidden layer, linear
heads for depth and angle) trained with mini-batch Adam on mean-squared
error.  Inputs are standardized with training-set statistics; targets are
standardized likewise and un-scaled on the way out.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tactile import ContactState, DomeGeometry, FeatureVector, add_feature_noise, pin_compressions

CONTACT_THRESHOLD = 0.5
FORMAT_NAME = "tacmm-regressor"
FORMAT_VERSION = 1

DEPTH_BINS = (1.0, 2.0, 3.0, 4.0, 5.0)
ANGLE_BINS = tuple(float(a) for a in range(-25, 30, 5))


class TrainingDivergence(RuntimeError):
    pass


@dataclass(eq=False)
class Dataset:
    features: np.ndarray
    depth: np.ndarray
    angle: np.ndarray
    split_seed: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.depth = np.asarray(self.depth, dtype=float)
        self.angle = np.asarray(self.angle, dtype=float)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        n = self.features.shape[0]
        if self.depth.shape != (n,) or self.angle.shape != (n,):
            raise ValueError("label arrays must match the number of feature rows")

    def __len__(self):
        return self.features.shape[0]

    @property
    def samples(self):
        return [(FeatureVector.from_array(f), float(d), float(a))
                for f, d, a in zip(self.features, self.depth, self.angle)]

    @property
    def contact_mask(self) -> np.ndarray:
        return self.depth > 0

    def subset(self, index) -> "Dataset":
        return Dataset(self.features[index], self.depth[index], self.angle[index], self.split_seed)

    def to_csv(self, path):
        path = Path(path)
        width = self.features.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"feature_{i}" for i in range(width)] + ["depth_label", "angle_label"])
            for f, d, a in zip(self.features, self.depth, self.angle):
                w.writerow([repr(float(v)) for v in f] + [repr(float(d)), repr(float(a))])

    @classmethod
    def from_csv(cls, path, split_seed: int = 0) -> "Dataset":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise ValueError(f"{path}: no samples")
        header = rows[0]
        if header[-2:] != ["depth_label", "angle_label"]:
            raise ValueError(f"{path}: unexpected header")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, :-2], data[:, -2], data[:, -1], split_seed)


def generate_dataset(n_contact: int, n_noncontact: int, dome: DomeGeometry | None = None,
                     noise_std: float = 0.02, seed: int = 0, depth_range=(1.0, 5.0),
                     angle_range=(-25.0, 25.0), max_shear: float = 5.0,
                     max_twist: float = 5.0) -> Dataset:
    """Labelled, shear-augmented samples.

    Contact samples draw depth and angle uniformly; before the features are
    captured each contact gets a random linear slip (``max_shear`` mm) plus
    a rotational twist (``max_twist`` degrees, applied as the equivalent
    arc-length slip at the apex).  Neither perturbation reaches the labels.
    Non-contact samples carry depth and angle labels of zero.
    """
    if n_contact < 0 or n_noncontact < 0:
        raise ValueError("sample counts must be non-negative")
    dome = dome or DomeGeometry()
    rng = np.random.default_rng(seed)
    m2 = dome.feature_size
    n = n_contact + n_noncontact
    X = np.zeros((n, m2))
    depth = np.zeros(n)
    angle = np.zeros(n)
    for i in range(n_contact):
        d = rng.uniform(*depth_range)
        a = rng.uniform(*angle_range)
        slip = rng.uniform(-max_shear, max_shear)
        twist = rng.uniform(-max_twist, max_twist)
        state = ContactState(d, a, 0.0, slip + dome.radius * math.radians(twist))
        X[i] = add_feature_noise(pin_compressions(state, dome), noise_std, rng).as_array()
        depth[i] = d
        angle[i] = a
    blank = pin_compressions(ContactState(), dome)
    for i in range(n_contact, n):
        X[i] = add_feature_noise(blank, noise_std, rng).as_array()
    return Dataset(X, depth, angle, split_seed=seed)


def split(dataset: Dataset, train_fraction: float, seed: int | None = None):
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if n == 1:
        raise ValueError("cannot split a single sample into two parts")
    rng = np.random.default_rng(dataset.split_seed if seed is None else seed)
    order = rng.permutation(n)
    n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
    return dataset.subset(np.sort(order[:n_train])), dataset.subset(np.sort(order[n_train:]))


@dataclass(frozen=True)
class TrainConfig:
    hidden_width: int = 64
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0


@dataclass(eq=False)
class RegressorModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    label_mean: np.ndarray
    label_std: np.ndarray
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2", "feature_mean", "feature_std", "label_mean", "label_std"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in {name}")
            setattr(self, name, arr)
        if np.any(self.feature_std <= 0) or np.any(self.label_std <= 0):
            raise ValueError("normalization stds must be positive")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_width(self) -> int:
        return self.W1.shape[1]

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def predict_batch(self, X) -> np.ndarray:
        """Predictions in physical units, shape (N, 2): depth mm, angle deg."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {X.shape[1]}")
        Z = (X - self.feature_mean) / self.feature_std
        H = np.tanh(Z @ self.W1 + self.b1)
        return (H @ self.W2 + self.b2) * self.label_std + self.label_mean

    def save(self, path):
        def row(a):
            return " ".join(repr(float(v)) for v in np.ravel(a))

        lines = [
            f"format: {FORMAT_NAME}",
            f"version: {FORMAT_VERSION}",
            f"input_dim: {self.input_dim}",
            f"hidden_width: {self.hidden_width}",
            "output_dim: 2",
            "activation: tanh",
            f"feature_mean: {row(self.feature_mean)}",
            f"feature_std: {row(self.feature_std)}",
            f"label_mean: {row(self.label_mean)}",
            f"label_std: {row(self.label_std)}",
            f"W1: {row(self.W1)}",
            f"b1: {row(self.b1)}",
            f"W2: {row(self.W2)}",
            f"b2: {row(self.b2)}",
        ]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "RegressorModel":
        fields_ = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            key, sep, value = line.partition(":")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'key: value'")
            fields_[key.strip()] = value.strip()
        if fields_.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: not a {FORMAT_NAME} file")
        if int(fields_.get("version", -1)) != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {fields_.get('version')}")
        n_in, n_h = int(fields_["input_dim"]), int(fields_["hidden_width"])

        def vec(key, shape):
            return np.array([float(v) for v in fields_[key].split()]).reshape(shape)

        return cls(vec("W1", (n_in, n_h)), vec("b1", (n_h,)), vec("W2", (n_h, 2)), vec("b2", (2,)),
                   vec("feature_mean", (n_in,)), vec("feature_std", (n_in,)),
                   vec("label_mean", (2,)), vec("label_std", (2,)))


def loss_and_gradients(params, Z, Y):
    """MSE in standardized space and its gradients w.r.t. ``[W1, b1, W2, b2]``.

    ``Z`` are standardized inputs, ``Y`` standardized targets (N, 2).
    """
    W1, b1, W2, b2 = params
    H = np.tanh(Z @ W1 + b1)
    out = H @ W2 + b2
    err = out - Y
    loss = float(np.mean(err ** 2))
    d_out = 2.0 * err / err.size
    gW2 = H.T @ d_out
    gb2 = d_out.sum(axis=0)
    d_pre = (d_out @ W2.T) * (1.0 - H ** 2)
    gW1 = Z.T @ d_pre
    gb1 = d_pre.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2]


def _normalization(dataset: Dataset):
    f_mean = dataset.features.mean(axis=0)
    f_std = dataset.features.std(axis=0)
    f_std = np.where(f_std > 1e-12, f_std, 1.0)
    labels = np.column_stack([dataset.depth, dataset.angle])
    l_mean = labels.mean(axis=0)
    l_std = labels.std(axis=0)
    l_std = np.where(l_std > 1e-12, l_std, 1.0)
    return f_mean, f_std, l_mean, l_std


def standardized(model: RegressorModel, dataset: Dataset):
    Z = (dataset.features - model.feature_mean) / model.feature_std
    Y = (np.column_stack([dataset.depth, dataset.angle]) - model.label_mean) / model.label_std
    return Z, Y


def init_model(dataset: Dataset, hidden_width: int, seed: int) -> RegressorModel:
    rng = np.random.default_rng(seed)
    n_in = dataset.features.shape[1]
    W1 = rng.normal(0.0, math.sqrt(1.0 / n_in), size=(n_in, hidden_width))
    W2 = rng.normal(0.0, math.sqrt(1.0 / hidden_width), size=(hidden_width, 2))
    return RegressorModel(W1, np.zeros(hidden_width), W2, np.zeros(2), *_normalization(dataset))


def training_loss(model: RegressorModel, dataset: Dataset) -> float:
    Z, Y = standardized(model, dataset)
    return loss_and_gradients(model.params(), Z, Y)[0]


def train(train_set: Dataset, hyper: TrainConfig | None = None) -> RegressorModel:
    hyper = hyper or TrainConfig()
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    model = init_model(train_set, hyper.hidden_width, hyper.seed)
    rng = np.random.default_rng(hyper.seed + 1)
    Z, Y = standardized(model, train_set)
    params = model.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    history = [loss_and_gradients(params, Z, Y)[0]]
    n = len(train_set)
    step = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            loss, grads = loss_and_gradients(params, Z[idx], Y[idx])
            if not math.isfinite(loss):
                raise TrainingDivergence("divergence: training loss became non-finite; "
                                         "lower the learning rate")
            step += 1
            lr_t = hyper.learning_rate * math.sqrt(1 - beta2 ** step) / (1 - beta1 ** step)
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                p -= lr_t * mi / (np.sqrt(vi) + eps)
        epoch_loss = loss_and_gradients(params, Z, Y)[0]
        if not math.isfinite(epoch_loss):
            raise TrainingDivergence("divergence: training loss became non-finite; "
                                     "lower the learning rate")
        history.append(epoch_loss)
    model.loss_history = history
    return model


def predict(model: RegressorModel, features) -> tuple[float, float]:
    """Single forward pass: ``(depth_hat mm, angle_hat deg)``."""
    x = features.as_array() if isinstance(features, FeatureVector) else np.asarray(features, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} features, got shape {x.shape}")
    h = np.tanh(((x - model.feature_mean) / model.feature_std) @ model.W1 + model.b1)
    out = (h @ model.W2 + model.b2) * model.label_std + model.label_mean
    return float(out[0]), float(out[1])


def is_contact(depth_hat: float, threshold: float = CONTACT_THRESHOLD) -> bool:
    return depth_hat >= threshold


@dataclass
class EvalReport:
    mae_depth: float
    mae_angle: float
    contact_classification_accuracy: float
    depth_bin_mae: dict
    angle_bin_mae: dict
    n_samples: int = 0
    n_contact: int = 0

    def to_dict(self) -> dict:
        return {
            "mae_depth": self.mae_depth,
            "mae_angle": self.mae_angle,
            "contact_classification_accuracy": self.contact_classification_accuracy,
            "depth_bin_mae": self.depth_bin_mae,
            "angle_bin_mae": self.angle_bin_mae,
            "n_samples": self.n_samples,
            "n_contact": self.n_contact,
        }

    def format(self) -> str:
        lines = [
            f"samples: {self.n_samples} ({self.n_contact} contact)",
            f"MAE depth: {self.mae_depth:.3f} mm",
            f"MAE angle: {self.mae_angle:.3f} deg",
            f"contact accuracy: {self.contact_classification_accuracy:.4f}",
            "depth bin        MAE depth  MAE angle",
        ]
        for k, (d, a) in self.depth_bin_mae.items():
            lines.append(f"{k:<16} {d:9.3f}  {a:9.3f}")
        lines.append("angle bin        MAE depth  MAE angle")
        for k, (d, a) in self.angle_bin_mae.items():
            lines.append(f"{k:<16} {d:9.3f}  {a:9.3f}")
        return "\n".join(lines)


def _binned(values, edges, err_d, err_a):
    table = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        last = hi == edges[-1]
        sel = (values >= lo) & ((values <= hi) if last else (values < hi))
        key = f"[{lo:g}, {hi:g}{']' if last else ')'}"
        if np.any(sel):
            table[key] = (float(np.mean(err_d[sel])), float(np.mean(err_a[sel])))
        else:
            table[key] = (float("nan"), float("nan"))
    return table


def evaluate_predictions(depth_hat, angle_hat, test_set: Dataset,
                         threshold: float = CONTACT_THRESHOLD) -> EvalReport:
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    depth_hat = np.asarray(depth_hat, dtype=float)
    angle_hat = np.asarray(angle_hat, dtype=float)
    contact = test_set.contact_mask
    err_d = np.abs(depth_hat - test_set.depth)
    err_a = np.abs(angle_hat - test_set.angle)
    if np.any(contact):
        mae_d = float(err_d[contact].mean())
        mae_a = float(err_a[contact].mean())
    else:
        mae_d = mae_a = 0.0
    acc = float(np.mean((depth_hat >= threshold) == contact))
    dc, ac = test_set.depth[contact], test_set.angle[contact]
    return EvalReport(
        mae_d, mae_a, acc,
        _binned(dc, DEPTH_BINS, err_d[contact], err_a[contact]),
        _binned(ac, ANGLE_BINS, err_d[contact], err_a[contact]),
        n_samples=len(test_set), n_contact=int(contact.sum()),
    )


def evaluate(model: RegressorModel, test_set: Dataset, threshold: float = CONTACT_THRESHOLD) -> EvalReport:
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    pred = model.predict_batch(test_set.features)
    return evaluate_predictions(pred[:, 0], pred[:, 1], test_set, threshold)
