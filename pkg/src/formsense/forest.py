"""Random-forest diagnosis over error signatures.

Gini-impurity decision trees on bootstrap samples, majority vote across
trees, per-(seed, tree-index) rng derivation so serial and parallel builds
agree, randomized-search cross-validation for tuning, and the weighted-F1
evaluation metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import containers
from .model import ClassLabel, ConfigError, ExerciseSpec
from .signature import ErrorSignature


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    max_depth: int | None = None
    max_features: str = "sqrt"  # "sqrt" | "log2" | "all"
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 or None")
        if self.max_features not in ("sqrt", "log2", "all"):
            raise ConfigError("max_features must be sqrt, log2 or all")


@dataclass(frozen=True)
class SearchSpace:
    n_trees: tuple[int, ...] = (100, 200, 300, 500)
    max_depth: tuple[int | None, ...] = (None, 8, 16)
    max_features: tuple[str, ...] = ("sqrt", "log2")
    min_samples_leaf: tuple[int, ...] = (1, 2, 4)
    candidates: int = 25
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.candidates < 1:
            raise ConfigError("candidates must be >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        for t in self.n_trees:
            if t < 1:
                raise ConfigError("n_trees choices must be >= 1")
        for m in self.min_samples_leaf:
            if m < 1:
                raise ConfigError("min_samples_leaf choices must be >= 1")


@dataclass
class Diagnosis:
    """One rep's verdict: class, vote fractions, display text, timing."""

    label: ClassLabel
    probabilities: dict[int, float]
    recommendation: str
    rep_index: int = -1
    latency_ms: float = 0.0


class _Tree:
    """One Gini decision tree stored as flat node arrays."""

    __slots__ = ("feature", "threshold", "left", "right", "outcome")

    def __init__(self, feature, threshold, left, right, outcome):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.outcome = outcome

    def predict(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        out = np.empty(n, dtype=np.intp)
        for i in range(n):
            node = 0
            while self.feature[node] >= 0:
                if x[i, self.feature[node]] <= self.threshold[node]:
                    node = self.left[node]
                else:
                    node = self.right[node]
            out[i] = self.outcome[node]
        return out


def _n_split_features(total: int, rule: str) -> int:
    if rule == "sqrt":
        return max(1, int(np.sqrt(total)))
    if rule == "log2":
        return max(1, int(np.log2(total))) if total > 1 else 1
    return total


def _gini_best_split(x_col: np.ndarray, y: np.ndarray, n_classes: int,
                     min_leaf: int) -> tuple[float, float] | None:
    """Best (impurity, threshold) along one feature, or None."""
    order = np.argsort(x_col, kind="stable")
    xs, ys = x_col[order], y[order]
    n = len(ys)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    left_counts = np.cumsum(onehot, axis=0)          # counts for split after i
    total = left_counts[-1]
    n_left = np.arange(1, n + 1, dtype=float)
    n_right = n - n_left
    with np.errstate(invalid="ignore", divide="ignore"):
        gini_l = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
        right_counts = total - left_counts
        gini_r = 1.0 - ((right_counts / np.maximum(n_right, 1)[:, None]) ** 2).sum(axis=1)
    weighted = (n_left * gini_l + n_right * np.where(n_right > 0, gini_r, 0.0)) / n
    valid = (xs[:-1] < xs[1:])                       # split only between distinct values
    valid &= (n_left[:-1] >= min_leaf) & (n_right[:-1] >= min_leaf)
    if not np.any(valid):
        return None
    cand = np.flatnonzero(valid)
    best = cand[np.argmin(weighted[cand])]
    threshold = 0.5 * (xs[best] + xs[best + 1])
    return float(weighted[best]), threshold


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, cfg: ForestConfig,
               rng: np.random.Generator) -> _Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    outcome: list[int] = []
    k = _n_split_features(x.shape[1], cfg.max_features)

    def leaf(idx: np.ndarray) -> int:
        node = len(feature)
        counts = np.bincount(y[idx], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        outcome.append(int(np.argmax(counts)))  # ties -> smallest class id
        return node

    def grow(idx: np.ndarray, depth: int) -> int:
        labels = y[idx]
        if (len(idx) < 2 * cfg.min_samples_leaf
                or (cfg.max_depth is not None and depth >= cfg.max_depth)
                or np.all(labels == labels[0])):
            return leaf(idx)
        cols = rng.choice(x.shape[1], size=k, replace=False)
        best = None
        for col in cols:
            found = _gini_best_split(x[idx, col], labels, n_classes,
                                     cfg.min_samples_leaf)
            if found and (best is None or found[0] < best[0]):
                best = (found[0], int(col), found[1])
        if best is None:
            return leaf(idx)
        _, col, thr = best
        node = len(feature)
        feature.append(col)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        outcome.append(-1)
        mask = x[idx, col] <= thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return _Tree(np.asarray(feature, dtype=np.intp),
                 np.asarray(threshold, dtype=float),
                 np.asarray(left, dtype=np.intp),
                 np.asarray(right, dtype=np.intp),
                 np.asarray(outcome, dtype=np.intp))


class Forest:
    """Bagged Gini trees; vote fractions double as class probabilities."""

    def __init__(self, trees: list[_Tree], class_ids: list[int], cfg: ForestConfig,
                 n_features: int):
        self.trees = trees
        self.class_ids = class_ids
        self.config = cfg
        self.n_features = n_features

    def votes(self, x: np.ndarray) -> np.ndarray:
        """Vote counts (n_rows, n_classes) across trees."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        counts = np.zeros((x.shape[0], len(self.class_ids)))
        for tree in self.trees:
            pred = tree.predict(x)
            counts[np.arange(x.shape[0]), pred] += 1.0
        return counts

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.votes(x) / len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Majority-vote class ids; ties resolve to the smaller id."""
        proba = self.votes(x)
        winners = np.argmax(proba, axis=1)
        return np.asarray([self.class_ids[w] for w in winners], dtype=np.intp)

    def save(self, path) -> None:
        arrays = {}
        for i, t in enumerate(self.trees):
            arrays[f"tree{i:04d}/feature"] = t.feature
            arrays[f"tree{i:04d}/threshold"] = t.threshold
            arrays[f"tree{i:04d}/left"] = t.left
            arrays[f"tree{i:04d}/right"] = t.right
            arrays[f"tree{i:04d}/outcome"] = t.outcome
        meta = {
            "format": "formsense-forest",
            "version": 1,
            "class_ids": list(self.class_ids),
            "n_features": self.n_features,
            "config": {
                "n_trees": self.config.n_trees,
                "max_depth": self.config.max_depth,
                "max_features": self.config.max_features,
                "min_samples_leaf": self.config.min_samples_leaf,
                "bootstrap": self.config.bootstrap,
                "seed": self.config.seed,
            },
        }
        containers.save_arrays(path, meta, arrays)


def load_forest(path) -> Forest:
    meta, arrays = containers.load_arrays(path)
    if meta.get("format") != "formsense-forest":
        raise ValueError(f"{path}: not a forest checkpoint")
    cfg = ForestConfig(**meta["config"])
    trees = []
    for i in range(cfg.n_trees):
        trees.append(_Tree(arrays[f"tree{i:04d}/feature"],
                           arrays[f"tree{i:04d}/threshold"],
                           arrays[f"tree{i:04d}/left"],
                           arrays[f"tree{i:04d}/right"],
                           arrays[f"tree{i:04d}/outcome"]))
    return Forest(trees, list(meta["class_ids"]), cfg, int(meta["n_features"]))


def train_forest(features: np.ndarray, labels, cfg: ForestConfig = ForestConfig()) -> Forest:
    """Fit the forest; labels are class ids (or ClassLabel instances)."""
    x = np.asarray(features, dtype=float)
    y_ids = np.asarray([lb.id if isinstance(lb, ClassLabel) else int(lb)
                        for lb in labels], dtype=np.intp)
    class_ids = sorted(set(int(c) for c in y_ids))
    if len(class_ids) < 2:
        raise ValueError("training needs at least 2 classes")
    counts = {c: int(np.sum(y_ids == c)) for c in class_ids}
    thin = [c for c, n in counts.items() if n < 2]
    if thin:
        raise ValueError(f"classes with fewer than 2 rows: {thin}")
    remap = {c: i for i, c in enumerate(class_ids)}
    y = np.asarray([remap[int(c)] for c in y_ids], dtype=np.intp)
    trees = []
    n = len(y)
    for i in range(cfg.n_trees):
        rng = np.random.default_rng([cfg.seed, i])  # (seed, tree-index) derivation
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        trees.append(_grow_tree(x[idx], y[idx], len(class_ids), cfg, rng))
    return Forest(trees, class_ids, cfg, x.shape[1])


def weighted_f1(predictions, truth) -> float:
    """Per-class F1 averaged with class-support weights."""
    pred = np.asarray([p.id if isinstance(p, ClassLabel) else int(p)
                       for p in predictions], dtype=np.intp)
    true = np.asarray([t.id if isinstance(t, ClassLabel) else int(t)
                       for t in truth], dtype=np.intp)
    if len(pred) != len(true):
        raise ValueError("prediction and truth lengths differ")
    if len(true) == 0:
        raise ValueError("empty inputs")
    score = 0.0
    for cls in np.unique(true):
        tp = float(np.sum((pred == cls) & (true == cls)))
        fp = float(np.sum((pred == cls) & (true != cls)))
        fn = float(np.sum((pred != cls) & (true == cls)))
        f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2.0 * tp + fp + fn) > 0 else 0.0
        score += f1 * float(np.sum(true == cls)) / len(true)
    return score


def stratified_folds(labels: np.ndarray, folds: int,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Round-robin class-stratified fold assignment; every class must fill
    every training fold."""
    y = np.asarray(labels, dtype=np.intp)
    for cls in np.unique(y):
        if np.sum(y == cls) < folds:
            raise ValueError(f"class {int(cls)} has fewer rows than folds")
    assignment = np.empty(len(y), dtype=np.intp)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        assignment[idx] = np.arange(len(idx)) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def tune_forest(features: np.ndarray, labels, space: SearchSpace = SearchSpace()) -> ForestConfig:
    """Randomized-search CV: best mean weighted F1, ties to the smaller model."""
    x = np.asarray(features, dtype=float)
    y = np.asarray([lb.id if isinstance(lb, ClassLabel) else int(lb)
                    for lb in labels], dtype=np.intp)
    rng = np.random.default_rng(space.seed)
    candidates = []
    seen = set()
    for _ in range(space.candidates):
        cfg = ForestConfig(
            n_trees=int(rng.choice(space.n_trees)),
            max_depth=space.max_depth[rng.integers(len(space.max_depth))],
            max_features=str(rng.choice(space.max_features)),
            min_samples_leaf=int(rng.choice(space.min_samples_leaf)),
            bootstrap=True,
            seed=space.seed,
        )
        key = (cfg.n_trees, cfg.max_depth, cfg.max_features, cfg.min_samples_leaf)
        if key not in seen:
            seen.add(key)
            candidates.append(cfg)
    folds = stratified_folds(y, space.folds, rng)

    def depth_key(cfg: ForestConfig) -> float:
        return float("inf") if cfg.max_depth is None else cfg.max_depth

    best_cfg = None
    best_score = -1.0
    for cfg in candidates:
        scores = []
        for f, test_idx in enumerate(folds):
            train_idx = np.concatenate([folds[g] for g in range(len(folds)) if g != f])
            forest = train_forest(x[train_idx], y[train_idx], cfg)
            scores.append(weighted_f1(forest.predict(x[test_idx]), y[test_idx]))
        score = float(np.mean(scores))
        if (best_cfg is None or score > best_score
                or (score == best_score and (cfg.n_trees, depth_key(cfg))
                    < (best_cfg.n_trees, depth_key(best_cfg)))):
            best_cfg = cfg
            best_score = score
    return best_cfg


def classify(forest: Forest, sig: ErrorSignature, spec: ExerciseSpec,
             rep_index: int = -1) -> Diagnosis:
    """Majority-vote diagnosis of one rep's signature."""
    proba = forest.predict_proba(np.asarray(sig.values))[0]
    winner = int(np.argmax(proba))
    label = spec.class_by_id(forest.class_ids[winner])
    return Diagnosis(
        label=label,
        probabilities={cid: float(p) for cid, p in zip(forest.class_ids, proba)},
        recommendation=label.recommendation,
        rep_index=rep_index,
    )
