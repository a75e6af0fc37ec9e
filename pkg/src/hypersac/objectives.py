"""Black-box losses: synthetic response surfaces and a built-in linear learner
whose five hyper-parameters play the roles of the LightGBM search space."""
import csv
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, DatasetError

SENTINEL_LOSS = 1e6
TRAIN_EPOCHS = 200
CACHE_DECIMALS = 6
LEARNER_PARAMS = ("feature_fraction", "learning_rate", "bagging_fraction", "reg_alpha",
                  "reg_lambda")

REGRESSION = "regression"
BINARY = "binary-classification"


# --- surfaces -------------------------------------------------------------

def surface_sphere(lam, space):
    """Mean squared distance from z = 0.7 in normalized coordinates, plus 0.01."""
    z = space.normalize(lam)
    return float(np.mean((z - 0.7) ** 2) + 0.01)


def surface_rastrigin_like(lam, space):
    """Bowl around z = 0.5 with cosine ripples; minimum 0.01 at the centre."""
    z = space.normalize(lam)
    d = z - 0.5
    return float(np.mean(d * d - 0.05 * np.cos(6.0 * np.pi * d)) + 0.06)


SURFACES = {
    "sphere": (surface_sphere, 0.7, 0.01),
    "rastrigin-like": (surface_rastrigin_like, 0.5, 0.01),
}


# --- datasets -------------------------------------------------------------

@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    task: str = REGRESSION
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        n = len(self.targets)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DatasetError(f"features {self.features.shape} do not match {n} targets")
        if not np.all(np.isfinite(self.features)) or not np.all(np.isfinite(self.targets)):
            raise DatasetError("dataset contains non-finite values")
        if self.task not in (REGRESSION, BINARY):
            raise DatasetError(f"unknown task {self.task!r}")
        if self.task == BINARY and not np.all(np.isin(self.targets, (0.0, 1.0))):
            raise DatasetError("binary targets must be 0 or 1")
        train, val = set(self.train_idx.tolist()), set(self.val_idx.tolist())
        if not train or not val:
            raise DatasetError("train and validation splits must both be non-empty")
        if train & val or train | val != set(range(n)):
            raise DatasetError("splits must be disjoint and cover every row")


def split_indices(n, seed, val_fraction=0.2):
    if n < 2:
        raise DatasetError(f"need at least 2 rows to split, got {n}")
    n_val = min(max(int(round(n * val_fraction)), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def load_csv(path, seed=0, task=None, val_fraction=0.2):
    """Read a numeric CSV (header row, target in the last column) and split it 80/20."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError(f"{path} is empty")
        if len(header) < 2:
            raise DatasetError("need at least one feature column and a target column", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"expected {len(header)} cells, found {len(row)}", line=line_no)
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise DatasetError(f"non-numeric cell in {row!r}", line=line_no) from None
            if not all(math.isfinite(v) for v in values):
                raise DatasetError("non-finite cell", line=line_no)
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path} has a header but no data rows")
    data = np.array(rows)
    targets = data[:, -1]
    if task is None:
        task = BINARY if np.all(np.isin(targets, (0.0, 1.0))) else REGRESSION
    train, val = split_indices(len(rows), seed, val_fraction)
    return Dataset(data[:, :-1], targets, train, val, task, [h.strip() for h in header[:-1]])


def make_synthetic(task=REGRESSION, rows=200, features=6, noise=0.1, seed=0):
    """Seeded linear dataset; classification labels come from the sign of a linear score."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(rows, features))
    w = rng.normal(size=features)
    score = x @ w + 0.5
    if task == BINARY:
        y = (score + noise * rng.normal(size=rows) > 0).astype(np.float64)
    else:
        y = score + noise * rng.normal(size=rows)
    train, val = split_indices(rows, seed)
    return Dataset(x, y, train, val, task)


def write_csv(dataset, path):
    names = dataset.feature_names or [f"x{k}" for k in range(dataset.features.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["target"])
        for x, y in zip(dataset.features, dataset.targets):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


# --- linear learner -------------------------------------------------------

def _as_learner_params(lam):
    if isinstance(lam, dict):
        return [float(lam[name]) for name in LEARNER_PARAMS]
    lam = [float(v) for v in lam]
    if len(lam) != len(LEARNER_PARAMS):
        raise ConfigError(f"the learner takes {len(LEARNER_PARAMS)} hyper-parameters")
    return lam


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _validation_loss(task, y, pred):
    if task == BINARY:
        p = np.clip(_sigmoid(pred), 1e-12, 1.0 - 1e-12)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    return float(np.mean((pred - y) ** 2))


def constant_predictor_loss(dataset):
    """Validation loss of the best constant fitted on the training split."""
    y_tr, y_va = dataset.targets[dataset.train_idx], dataset.targets[dataset.val_idx]
    if dataset.task == BINARY:
        rate = np.clip(y_tr.mean(), 1e-12, 1 - 1e-12)
        return _validation_loss(BINARY, y_va, np.full(len(y_va), math.log(rate / (1 - rate))))
    return _validation_loss(REGRESSION, y_va, np.full(len(y_va), y_tr.mean()))


def train_eval_linear(dataset, lam, seed=0, epochs=TRAIN_EPOCHS):
    """Train a linear/logistic model by full-batch gradient descent; return validation loss.

    ``lam`` is a mapping or sequence ordered as ``LEARNER_PARAMS``. The
    feature subset is drawn once, the row subset anew every epoch. The
    intercept starts at the constant-predictor optimum and is not
    penalized. Divergence yields ``SENTINEL_LOSS``.
    """
    feature_fraction, lr, bagging_fraction, reg_alpha, reg_lambda = _as_learner_params(lam)
    rng = np.random.default_rng(seed)
    x_tr = dataset.features[dataset.train_idx]
    y_tr = dataset.targets[dataset.train_idx]
    x_va = dataset.features[dataset.val_idx]
    y_va = dataset.targets[dataset.val_idx]
    n_rows, n_feat = x_tr.shape

    k = min(max(math.ceil(feature_fraction * n_feat), 1), n_feat)
    cols = np.sort(rng.choice(n_feat, size=k, replace=False))
    mu = x_tr[:, cols].mean(axis=0)
    sd = x_tr[:, cols].std(axis=0)
    sd[sd == 0.0] = 1.0
    x_tr = (x_tr[:, cols] - mu) / sd
    x_va = (x_va[:, cols] - mu) / sd

    if dataset.task == BINARY:
        rate = np.clip(y_tr.mean(), 1e-12, 1 - 1e-12)
        b = math.log(rate / (1.0 - rate))
    else:
        b = float(y_tr.mean())
    w = np.zeros(k)
    m = min(max(math.ceil(bagging_fraction * n_rows), 1), n_rows)

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            rows = rng.choice(n_rows, size=m, replace=False)
            xb, yb = x_tr[rows], y_tr[rows]
            pred = xb @ w + b
            if dataset.task == BINARY:
                resid = _sigmoid(pred) - yb
                gw, gb = xb.T @ resid / m, resid.mean()
            else:
                resid = pred - yb
                gw, gb = 2.0 * xb.T @ resid / m, 2.0 * resid.mean()
            gw = gw + reg_alpha * np.sign(w) + 2.0 * reg_lambda * w
            w = w - lr * gw
            b = b - lr * gb
            if not (np.all(np.isfinite(w)) and math.isfinite(b)):
                return SENTINEL_LOSS
        loss = _validation_loss(dataset.task, y_va, x_va @ w + b)
    return loss if math.isfinite(loss) else SENTINEL_LOSS


# --- objective wrapper ----------------------------------------------------

@dataclass
class ObjectiveSpec:
    kind: str = "surface"           # "surface" or "learner"
    name: str = "sphere"            # surface name
    dataset: str = None             # CSV path for the learner
    task: str = None                # learner task override
    metric: str = None              # "mean-squared-error" or "cross-entropy"

    def __post_init__(self):
        if self.kind == "surface":
            if self.name not in SURFACES:
                raise ConfigError(f"unknown surface {self.name!r}; choose from {sorted(SURFACES)}")
        elif self.kind == "learner":
            if self.metric not in (None, "mean-squared-error", "cross-entropy"):
                raise ConfigError(f"unknown metric {self.metric!r}")
        else:
            raise ConfigError(f"unknown objective kind {self.kind!r}")

    @classmethod
    def parse(cls, text):
        """``sphere``, ``rastrigin-like`` or a path to a CSV file."""
        if text in SURFACES:
            return cls("surface", text)
        if text.endswith(".csv"):
            return cls("learner", dataset=text)
        raise ConfigError(f"objective {text!r} is neither a surface name nor a .csv path")

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


class EvalCache:
    """Losses keyed by hyper-parameters rounded to six decimals."""

    def __init__(self):
        self.store = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(lam):
        return tuple(round(float(v), CACHE_DECIMALS) + 0.0 for v in lam)

    def get(self, lam):
        value = self.store.get(self.key(lam))
        if value is None:
            self.misses += 1
        else:
            self.hits += 1
        return value

    def put(self, lam, loss):
        self.store[self.key(lam)] = loss


class Objective:
    """Callable ``lambda -> loss`` with caching, call counting and a divergence sentinel."""

    def __init__(self, spec, space, seed=0, dataset=None, use_cache=True):
        self.spec = spec
        self.space = space
        self.seed = seed
        self.cache = EvalCache() if use_cache else None
        self.calls = 0
        self.nonfinite = 0
        if spec.kind == "learner":
            if dataset is None:
                if spec.dataset is None:
                    raise ConfigError("learner objective needs a dataset")
                dataset = load_csv(spec.dataset, seed=seed, task=spec.task)
            self.dataset = dataset
        else:
            self.dataset = None

    def _raw(self, lam):
        if self.spec.kind == "surface":
            return SURFACES[self.spec.name][0](lam, self.space)
        return train_eval_linear(self.dataset, lam, seed=self.seed)

    def __call__(self, lam):
        self.calls += 1
        if self.cache is not None:
            hit = self.cache.get(lam)
            if hit is not None:
                return hit
        loss = self._raw(lam)
        if not math.isfinite(loss) or loss == SENTINEL_LOSS:
            self.nonfinite += 1
            loss = SENTINEL_LOSS
        if self.cache is not None:
            self.cache.put(lam, loss)
        return loss


def evaluate(spec, lam, space, seed=0, dataset=None):
    """One-shot uncached evaluation."""
    return Objective(spec, space, seed, dataset, use_cache=False)(lam)
