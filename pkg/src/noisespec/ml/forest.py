"""Random forest regressor: bagged variance-splitting CART trees.

Each tree is fit on a bootstrap sample (N draws with replacement) from its
own RNG stream; every split picks the best variance-reduction threshold
among ``max_features`` randomly chosen features, with candidate thresholds
at midpoints of sorted distinct feature values.  Ties break toward the
lowest feature index, then the lowest threshold, so fits are bit-for-bit
reproducible.  Prediction is the plain mean of the per-tree predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    min_samples_split: int = 2
    max_depth: Optional[int] = None          # None: grow until pure/small leaves
    max_features: Optional[int] = None       # None: floor(sqrt(n_features))
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")


@dataclass
class Tree:
    """Flat preorder node arrays; feature == -1 marks a leaf."""

    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[float] = field(default_factory=list)

    def add_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict_one(self, x) -> float:
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return self.value[i]


@dataclass
class ForestModel:
    config: ForestConfig
    n_features: int
    trees: List[Tree]
    y_min: float
    y_max: float


def _best_split(X, y, idx, feat_candidates):
    """(gain, feature, threshold) of the best variance-reduction split.

    Gain is the drop in summed squared deviations; returns feature -1 when
    no candidate feature varies inside the node.
    """
    yv = y[idx]
    n = yv.size
    s_tot = yv.sum()
    ss_tot = float(yv @ yv) - s_tot * s_tot / n
    best = (-1.0, -1, 0.0)
    for f in feat_candidates:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        ys = yv[order]
        c1 = np.cumsum(ys)[:-1]
        c2 = np.cumsum(ys * ys)[:-1]
        nl = np.arange(1, n)
        boundary = vs[1:] != vs[:-1]
        ss_l = c2 - c1 * c1 / nl
        s_r = s_tot - c1
        ss_r = (ss_tot + s_tot * s_tot / n - c2) - s_r * s_r / (n - nl)
        gain = ss_tot - (ss_l + ss_r)
        gain[~boundary] = -np.inf
        j = int(np.argmax(gain))
        g = float(gain[j])
        if g < 0.0:
            continue
        thr = 0.5 * (vs[j] + vs[j + 1])
        cand = (g, int(f), thr)
        if (cand[0] > best[0]
                or (cand[0] == best[0] and best[1] >= 0
                    and (cand[1], cand[2]) < (best[1], best[2]))):
            best = cand
    return best


def _fit_tree(X, y, cfg: ForestConfig, rng: np.random.Generator) -> Tree:
    n, p = X.shape
    m = cfg.max_features if cfg.max_features is not None else max(1, int(np.sqrt(p)))
    m = min(m, p)
    boot = rng.integers(0, n, size=n)
    tree = Tree()
    root = tree.add_node()
    stack = [(root, boot, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yv = y[idx]
        tree.value[node] = float(yv.mean())
        if (idx.size < cfg.min_samples_split
                or (cfg.max_depth is not None and depth >= cfg.max_depth)
                or np.all(yv == yv[0])):
            continue
        feats = np.sort(rng.choice(p, size=m, replace=False))
        gain, f, thr = _best_split(X, y, idx, feats)
        if f < 0:
            continue
        mask = X[idx, f] <= thr
        left = tree.add_node()
        right = tree.add_node()
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = left
        tree.right[node] = right
        # push right first so the left branch is processed (and draws RNG)
        # next: a fixed traversal order keeps fits reproducible
        stack.append((right, idx[~mask], depth + 1))
        stack.append((left, idx[mask], depth + 1))
    return tree


def fit_forest(X, y, config: ForestConfig = ForestConfig()) -> ForestModel:
    """Fit the bagged ensemble; deterministic given ``config.seed``."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("X must be 2-D with at least 2 rows")
    if y.shape != (X.shape[0],):
        raise ValueError("y must be 1-D and match X rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    streams = np.random.SeedSequence(config.seed).spawn(config.n_estimators)
    trees = [_fit_tree(X, y, config, np.random.default_rng(s)) for s in streams]
    return ForestModel(config=config, n_features=X.shape[1], trees=trees,
                       y_min=float(y.min()), y_max=float(y.max()))


def predict_forest(model: ForestModel, X) -> np.ndarray:
    """Mean of the per-tree predictions."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got {X.shape}")
    out = np.zeros(X.shape[0])
    for tree in model.trees:
        out += [tree.predict_one(row) for row in X]
    return out / len(model.trees)


# serialization: one JSON document, preorder node lists per tree

def forest_to_json(model: ForestModel) -> str:
    doc = {
        "kind": "forest",
        "config": {
            "n_estimators": model.config.n_estimators,
            "min_samples_split": model.config.min_samples_split,
            "max_depth": model.config.max_depth,
            "max_features": model.config.max_features,
            "seed": model.config.seed,
        },
        "n_features": model.n_features,
        "y_min": model.y_min,
        "y_max": model.y_max,
        "trees": [
            {"feature": t.feature, "threshold": t.threshold, "left": t.left,
             "right": t.right, "value": t.value}
            for t in model.trees
        ],
    }
    return json.dumps(doc)


def forest_from_json(text: str) -> ForestModel:
    doc = json.loads(text)
    if doc.get("kind") != "forest":
        raise ValueError("not a forest model file")
    trees = [Tree(feature=t["feature"], threshold=t["threshold"],
                  left=t["left"], right=t["right"], value=t["value"])
             for t in doc["trees"]]
    return ForestModel(config=ForestConfig(**doc["config"]),
                       n_features=doc["n_features"], trees=trees,
                       y_min=doc["y_min"], y_max=doc["y_max"])
