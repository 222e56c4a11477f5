"""Self-contained model zoo.

Regularized logistic/linear regression trained by batch gradient descent,
depth-limited gradient-boosted regression trees over feature histograms,
multiclass softmax regression, Platt probability calibration, and
permutation feature importance. Training is single-threaded and
deterministic under seed; artifacts are immutable after training.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import errors

ARTIFACT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    l2: float = 1e-4
    epochs: int = 200
    rounds: int = 50
    depth: int = 3
    leaf_min: int = 10
    subsample: float = 1.0

    def __post_init__(self):
        if min(self.learning_rate, self.l2, self.subsample) <= 0 \
                or self.epochs < 0 or self.rounds < 0 \
                or self.depth < 1 or self.leaf_min < 1:
            raise ValueError("hyperparameters must be positive")
        if self.depth > 8:
            raise ValueError("tree depth capped at 8")


@dataclass(frozen=True)
class TrainReport:
    losses: tuple[float, ...]
    validation_metric: Optional[float] = None
    validation_metric_name: Optional[str] = None


@dataclass(frozen=True)
class TreeNode:
    feature: int = -1          # -1 marks a leaf
    threshold_bin: int = -1    # split goes left when bin <= threshold_bin
    value: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None


@dataclass(frozen=True)
class ModelArtifact:
    kind: str  # logistic | linear | gbdt | multiclass-softmax
    hyperparams: Hyperparams
    seed: int
    n_features: int
    weights: Optional[np.ndarray] = None        # linear family (incl. bias)
    trees: tuple[TreeNode, ...] = ()
    bin_edges: Optional[np.ndarray] = None      # gbdt histogram edges
    base_value: float = 0.0
    n_classes: int = 2
    calibration: Optional[tuple[float, float]] = None  # Platt (a, b)
    train_report: TrainReport = field(
        default_factory=lambda: TrainReport(losses=()))

    @property
    def manifest_hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


# --- shared numerics -----------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray,
                       l2: float) -> tuple[float, np.ndarray]:
    """L2-regularized mean log loss and its gradient (bias unpenalized)."""
    z = X @ w
    p = _sigmoid(z)
    eps = 1e-12
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    reg = w.copy()
    reg[-1] = 0.0
    loss += 0.5 * l2 * float(reg @ reg)
    grad = X.T @ (p - y) / len(y) + l2 * reg
    return loss, grad


def _with_bias(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((len(X), 1))])


# --- gradient-boosted trees ---------------------------------------------

_N_BINS = 32


def _fit_bin_edges(X: np.ndarray) -> np.ndarray:
    qs = np.linspace(0, 100, _N_BINS + 1)[1:-1]
    return np.percentile(X, qs, axis=0)  # (n_edges, d)


def _binned(X: np.ndarray, edges: np.ndarray) -> np.ndarray:
    B = np.empty(X.shape, dtype=np.int64)
    for j in range(X.shape[1]):
        B[:, j] = np.searchsorted(edges[:, j], X[:, j], side="left")
    return B


def _build_tree(B: np.ndarray, g: np.ndarray, idx: np.ndarray,
                depth: int, leaf_min: int) -> TreeNode:
    n = len(idx)
    total = float(g[idx].sum())
    if depth == 0 or n < 2 * leaf_min:
        return TreeNode(value=total / n)
    best = None  # (gain, feature, threshold_bin)
    base_score = total * total / n
    for j in range(B.shape[1]):
        bins = B[idx, j]
        counts = np.bincount(bins, minlength=_N_BINS)
        sums = np.bincount(bins, weights=g[idx], minlength=_N_BINS)
        cn = np.cumsum(counts)[:-1]
        cs = np.cumsum(sums)[:-1]
        valid = (cn >= leaf_min) & (n - cn >= leaf_min)
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = cs * cs / cn + (total - cs) ** 2 / (n - cn) - base_score
        gain[~valid] = -np.inf
        t = int(np.argmax(gain))
        if np.isfinite(gain[t]) and (best is None or gain[t] > best[0]):
            best = (float(gain[t]), j, t)
    if best is None or best[0] <= 1e-12:
        return TreeNode(value=total / n)
    _, j, t = best
    go_left = B[idx, j] <= t
    return TreeNode(
        feature=j, threshold_bin=t,
        left=_build_tree(B, g, idx[go_left], depth - 1, leaf_min),
        right=_build_tree(B, g, idx[~go_left], depth - 1, leaf_min),
    )


def _tree_predict(node: TreeNode, B: np.ndarray) -> np.ndarray:
    out = np.empty(len(B))
    stack = [(node, np.arange(len(B)))]
    while stack:
        nd, idx = stack.pop()
        if nd.feature < 0:
            out[idx] = nd.value
            continue
        left = B[idx, nd.feature] <= nd.threshold_bin
        stack.append((nd.left, idx[left]))
        stack.append((nd.right, idx[~left]))
    return out


# --- training ------------------------------------------------------------

def train(kind: str, X: np.ndarray, y: np.ndarray, hp: Hyperparams,
          seed: int) -> ModelArtifact:
    """Train a model of the given kind; deterministic under seed.

    Aborts with NonFiniteLoss on divergence instead of silently clipping.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise errors.DimensionMismatch("X must be (n, d) aligned with y")
    if kind == "logistic":
        if len(np.unique(y)) < 2:
            raise errors.DegenerateLabels("single-class labels")
        return _train_logistic(X, y, hp, seed)
    if kind == "linear":
        return _train_linear(X, y, hp, seed)
    if kind == "gbdt":
        return _train_gbdt(X, y, hp, seed)
    if kind == "multiclass-softmax":
        if len(np.unique(y)) < 2:
            raise errors.DegenerateLabels("single-class labels")
        return _train_softmax(X, y.astype(int), hp, seed)
    raise ValueError(f"unknown model kind {kind!r}")


def _train_logistic(X, y, hp, seed) -> ModelArtifact:
    Xb = _with_bias(X)
    w = np.zeros(Xb.shape[1])
    losses = []
    for _ in range(hp.epochs):
        loss, grad = logistic_loss_grad(w, Xb, y, hp.l2)
        if not np.isfinite(loss):
            raise errors.NonFiniteLoss(f"diverged at epoch {len(losses)}")
        losses.append(loss)
        w -= hp.learning_rate * grad
    return ModelArtifact(kind="logistic", hyperparams=hp, seed=seed,
                         n_features=X.shape[1], weights=w,
                         train_report=TrainReport(losses=tuple(losses)))


def _train_linear(X, y, hp, seed) -> ModelArtifact:
    Xb = _with_bias(X)
    w = np.zeros(Xb.shape[1])
    losses = []
    for _ in range(hp.epochs):
        resid = Xb @ w - y
        reg = w.copy()
        reg[-1] = 0.0
        loss = float(np.mean(resid ** 2) / 2 + 0.5 * hp.l2 * (reg @ reg))
        if not np.isfinite(loss):
            raise errors.NonFiniteLoss(f"diverged at epoch {len(losses)}")
        losses.append(loss)
        grad = Xb.T @ resid / len(y) + hp.l2 * reg
        w -= hp.learning_rate * grad
    return ModelArtifact(kind="linear", hyperparams=hp, seed=seed,
                         n_features=X.shape[1], weights=w,
                         train_report=TrainReport(losses=tuple(losses)))


def _train_gbdt(X, y, hp, seed) -> ModelArtifact:
    rng = np.random.RandomState(seed)
    edges = _fit_bin_edges(X)
    B = _binned(X, edges)
    base = float(y.mean())
    pred = np.full(len(y), base)
    trees = []
    losses = []
    n = len(y)
    for _ in range(hp.rounds):
        resid = y - pred
        loss = float(np.mean(resid ** 2))
        if not np.isfinite(loss):
            raise errors.NonFiniteLoss(f"diverged at round {len(trees)}")
        losses.append(loss)
        if hp.subsample < 1.0:
            idx = rng.choice(n, size=max(1, int(hp.subsample * n)),
                             replace=False)
            idx.sort()
        else:
            idx = np.arange(n)
        tree = _build_tree(B, resid, idx, hp.depth, hp.leaf_min)
        trees.append(tree)
        pred += hp.learning_rate * _tree_predict(tree, B)
    return ModelArtifact(kind="gbdt", hyperparams=hp, seed=seed,
                         n_features=X.shape[1], trees=tuple(trees),
                         bin_edges=edges, base_value=base,
                         train_report=TrainReport(losses=tuple(losses)))


def _train_softmax(X, y, hp, seed) -> ModelArtifact:
    k = int(y.max()) + 1
    Xb = _with_bias(X)
    W = np.zeros((Xb.shape[1], k))
    Y = np.eye(k)[y]
    losses = []
    for _ in range(hp.epochs):
        Z = Xb @ W
        Z -= Z.max(axis=1, keepdims=True)
        P = np.exp(Z)
        P /= P.sum(axis=1, keepdims=True)
        loss = float(-np.mean(np.log(P[np.arange(len(y)), y] + 1e-12)))
        reg = W.copy()
        reg[-1, :] = 0.0
        loss += 0.5 * hp.l2 * float((reg * reg).sum())
        if not np.isfinite(loss):
            raise errors.NonFiniteLoss(f"diverged at epoch {len(losses)}")
        losses.append(loss)
        grad = Xb.T @ (P - Y) / len(y) + hp.l2 * reg
        W -= hp.learning_rate * grad
    return ModelArtifact(kind="multiclass-softmax", hyperparams=hp, seed=seed,
                         n_features=X.shape[1], weights=W, n_classes=k,
                         train_report=TrainReport(losses=tuple(losses)))


# --- prediction ----------------------------------------------------------

def predict(artifact: ModelArtifact, X: np.ndarray) -> np.ndarray:
    """Score inputs: probability for logistic, value for linear/gbdt,
    probability vector per row for multiclass-softmax."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != artifact.n_features:
        raise errors.DimensionMismatch(
            f"expected {artifact.n_features} features, got {X.shape[1]}")
    if artifact.kind == "logistic":
        z = _with_bias(X) @ artifact.weights
        if artifact.calibration is not None:
            a, b = artifact.calibration
            z = a * z + b
        return _sigmoid(z)
    if artifact.kind == "linear":
        return _with_bias(X) @ artifact.weights
    if artifact.kind == "gbdt":
        B = _binned(X, artifact.bin_edges)
        out = np.full(len(X), artifact.base_value)
        for tree in artifact.trees:
            out += artifact.hyperparams.learning_rate * _tree_predict(tree, B)
        return out
    if artifact.kind == "multiclass-softmax":
        Z = _with_bias(X) @ artifact.weights
        Z -= Z.max(axis=1, keepdims=True)
        P = np.exp(Z)
        return P / P.sum(axis=1, keepdims=True)
    raise ValueError(artifact.kind)


# --- calibration ---------------------------------------------------------

def expected_calibration_error(scores: np.ndarray, labels: np.ndarray,
                               bins: int = 10) -> float:
    edges = np.linspace(0, 1, bins + 1)
    which = np.clip(np.digitize(scores, edges[1:-1]), 0, bins - 1)
    ece = 0.0
    for b in range(bins):
        mask = which == b
        if mask.any():
            ece += mask.mean() * abs(scores[mask].mean() - labels[mask].mean())
    return float(ece)


def calibrate(artifact: ModelArtifact, X_val: np.ndarray,
              y_val: np.ndarray) -> ModelArtifact:
    """Fit a Platt layer sigmoid(a*z + b) on the model's pre-sigmoid score.

    Kept only when it does not worsen expected calibration error on the
    validation fold; otherwise the identity layer (1, 0) is stored.
    """
    y_val = np.asarray(y_val, dtype=float)
    if len(np.unique(y_val)) < 2:
        raise errors.DegenerateLabels("validation needs both classes")
    if artifact.kind != "logistic":
        raise ValueError("calibration applies to logistic artifacts")
    base = replace(artifact, calibration=None)
    p = predict(base, X_val)
    if np.ptp(p) < 1e-12:
        raise errors.DegenerateLabels("constant scores cannot be calibrated")
    z = np.log(p / (1 - p))
    a, b = 1.0, 0.0
    for _ in range(100):  # Newton on the 2-parameter log loss
        q = _sigmoid(a * z + b)
        g = np.array([np.mean((q - y_val) * z), np.mean(q - y_val)])
        wgt = q * (1 - q)
        H = np.array([[np.mean(wgt * z * z), np.mean(wgt * z)],
                      [np.mean(wgt * z), np.mean(wgt)]])
        H += 1e-9 * np.eye(2)
        step = np.linalg.solve(H, g)
        a, b = a - step[0], b - step[1]
        if np.abs(step).max() < 1e-10:
            break
    ece_before = expected_calibration_error(p, y_val)
    ece_after = expected_calibration_error(_sigmoid(a * z + b), y_val)
    if ece_after > ece_before + 1e-6:
        a, b = 1.0, 0.0
    return replace(artifact, calibration=(float(a), float(b)))


# --- permutation feature importance --------------------------------------

def feature_importance(artifact: ModelArtifact, X_val: np.ndarray,
                       y_val: np.ndarray, seed: int,
                       n_repeats: int = 5) -> list[tuple[int, float]]:
    """Per-column metric drop under permutation, clipped at 0, ranked.

    Metric is AUC for binary-labeled data, negative RMSE otherwise.
    """
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if len(X_val) < 50:
        raise errors.InsufficientData("need >= 50 validation rows")
    rng = np.random.RandomState(seed)
    base = _metric(predict(artifact, X_val), y_val)
    scores = []
    for j in range(X_val.shape[1]):
        drops = []
        for _ in range(n_repeats):
            Xp = X_val.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xp)), j]
            drops.append(base - _metric(predict(artifact, Xp), y_val))
        scores.append((j, max(0.0, float(np.mean(drops)))))
    scores.sort(key=lambda t: (-t[1], t[0]))
    return scores


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC (Mann-Whitney); ties get midranks."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    ranks[order] = np.arange(1, len(scores) + 1)
    # midranks for ties
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    pos = labels == 1
    n1, n0 = pos.sum(), (~pos).sum()
    if n1 == 0 or n0 == 0:
        raise errors.DegenerateLabels("AUC needs both classes")
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def _metric(scores: np.ndarray, labels: np.ndarray) -> float:
    binary = set(np.unique(labels)) <= {0.0, 1.0}
    if binary and len(np.unique(labels)) == 2:
        return auc(scores, labels)
    return -float(np.sqrt(np.mean((scores - labels) ** 2)))


# --- serialization -------------------------------------------------------

def _tree_to_json(node: TreeNode) -> dict:
    if node.feature < 0:
        return {"v": node.value}
    return {"f": node.feature, "t": node.threshold_bin,
            "l": _tree_to_json(node.left), "r": _tree_to_json(node.right)}


def _tree_from_json(d: dict) -> TreeNode:
    if "v" in d:
        return TreeNode(value=d["v"])
    return TreeNode(feature=d["f"], threshold_bin=d["t"],
                    left=_tree_from_json(d["l"]),
                    right=_tree_from_json(d["r"]))


def serialize(artifact: ModelArtifact) -> str:
    """Versioned text serialization; float repr round-trips exactly."""
    doc = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "kind": artifact.kind,
        "hyperparams": vars(artifact.hyperparams).copy()
        if hasattr(artifact.hyperparams, "__dict__")
        else artifact.hyperparams.__dict__,
        "seed": artifact.seed,
        "n_features": artifact.n_features,
        "weights": None if artifact.weights is None
        else artifact.weights.tolist(),
        "trees": [_tree_to_json(t) for t in artifact.trees],
        "bin_edges": None if artifact.bin_edges is None
        else artifact.bin_edges.tolist(),
        "base_value": artifact.base_value,
        "n_classes": artifact.n_classes,
        "calibration": artifact.calibration,
        "train_report": {
            "losses": list(artifact.train_report.losses),
            "validation_metric": artifact.train_report.validation_metric,
            "validation_metric_name":
                artifact.train_report.validation_metric_name,
        },
    }
    return json.dumps(doc, sort_keys=True)


def deserialize(text: str) -> ModelArtifact:
    doc = json.loads(text)
    if doc["format_version"] != ARTIFACT_FORMAT_VERSION:
        raise ValueError(f"unsupported format {doc['format_version']}")
    hp = Hyperparams(**doc["hyperparams"])
    report = TrainReport(
        losses=tuple(doc["train_report"]["losses"]),
        validation_metric=doc["train_report"]["validation_metric"],
        validation_metric_name=doc["train_report"]["validation_metric_name"])
    return ModelArtifact(
        kind=doc["kind"], hyperparams=hp, seed=doc["seed"],
        n_features=doc["n_features"],
        weights=None if doc["weights"] is None else np.array(doc["weights"]),
        trees=tuple(_tree_from_json(t) for t in doc["trees"]),
        bin_edges=None if doc["bin_edges"] is None
        else np.array(doc["bin_edges"]),
        base_value=doc["base_value"], n_classes=doc["n_classes"],
        calibration=None if doc["calibration"] is None
        else tuple(doc["calibration"]),
        train_report=report)
