"""Random forest binary classifier built from CART trees on Gini impurity.

Randomness comes from one root seed. ``numpy.random.SeedSequence(seed)`` is
spawned into one child per tree and each child drives a ``PCG64`` generator,
so every tree's bootstrap draw and feature subsets are independent of the
order (or thread) in which trees are grown.

Bootstrap resamples are represented as per-row multiplicities rather than
duplicated rows; Gini, thresholds and leaf fractions are identical either way.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArgumentError, FormatError, TrainingError

FORMAT_NAME = "iuu-seascapes-forest"
FORMAT_VERSION = 1
# A split must lower impurity by more than this to be kept.
MIN_DECREASE = 1e-12


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(sqrt(n_features))
    bootstrap: bool = True
    class_weight: str | None = None  # None or "balanced"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ArgumentError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ArgumentError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise ArgumentError("min_samples_leaf must be >= 1")
        if self.class_weight not in (None, "balanced"):
            raise ArgumentError(f"class_weight must be None or 'balanced', got {self.class_weight!r}")

    def resolve_features(self, n_features: int) -> int:
        k = self.features_per_split
        if k is None:
            k = math.ceil(math.sqrt(n_features))
        if not 1 <= k <= n_features:
            raise ArgumentError(f"features_per_split={k} outside [1, {n_features}]")
        return k


@dataclass(frozen=True)
class SplitChoice:
    feature: int
    threshold: float
    impurity: float  # weighted child Gini


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: object
    right: object


def gini(labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ArgumentError("gini of an empty set")
    p = np.count_nonzero(labels) / labels.size
    q = 1.0 - p
    return 1.0 - p * p - q * q


def _gini_from(pos, total):
    p = pos / total
    q = (total - pos) / total
    return 1.0 - p * p - q * q


def midpoint(a: float, b: float) -> float:
    t = 0.5 * (a + b)
    return a if t >= b else t


def best_split(X, y, features=None, min_samples_leaf=1, weights=None, counts=None):
    """Best (feature, midpoint threshold) by weighted child Gini.

    Rows with ``x <= threshold`` go left. Ties are broken by lowest feature
    index, then lowest threshold. Returns ``None`` when no admissible split
    lowers impurity.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        return None
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    c = np.ones(n, dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    yw = w * y
    total_w = w.sum()
    total_pos = yw.sum()
    total_c = c.sum()
    parent = _gini_from(total_pos, total_w)
    if parent <= 0.0 or total_c < 2 * min_samples_leaf:
        return None
    if features is None:
        features = range(X.shape[1])

    best_f, best_t, best_imp = -1, 0.0, math.inf
    for f in sorted(features):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        boundary = xs[1:] > xs[:-1]
        if not boundary.any():
            continue
        wl = np.cumsum(w[order])[:-1]
        pl = np.cumsum(yw[order])[:-1]
        cl = np.cumsum(c[order])[:-1]
        wr = total_w - wl
        pr = total_pos - pl
        ok = boundary & (cl >= min_samples_leaf) & (total_c - cl >= min_samples_leaf)
        if not ok.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            p_l = pl / wl
            q_l = (wl - pl) / wl
            p_r = pr / wr
            q_r = (wr - pr) / wr
            g_l = 1.0 - p_l * p_l - q_l * q_l
            g_r = 1.0 - p_r * p_r - q_r * q_r
            imp = wl / total_w * g_l + wr / total_w * g_r
        imp = np.where(ok, imp, math.inf)
        i = int(np.argmin(imp))
        if imp[i] < best_imp:
            best_f, best_t, best_imp = int(f), midpoint(float(xs[i]), float(xs[i + 1])), float(imp[i])
    if best_f < 0 or not best_imp < parent - MIN_DECREASE:
        return None
    return SplitChoice(best_f, best_t, best_imp)


@dataclass(eq=False)
class Tree:
    """Flattened tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "value", "n_samples")
        )

    __hash__ = None

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.maximum(f, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_nodes(self, i=0):
        if self.feature[i] < 0:
            return Leaf(float(self.value[i]), int(self.n_samples[i]))
        return Split(int(self.feature[i]), float(self.threshold[i]),
                     self.to_nodes(int(self.left[i])), self.to_nodes(int(self.right[i])))

    @classmethod
    def from_nodes(cls, root) -> "Tree":
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "n_samples")}

        def visit(node):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(0)
            if isinstance(node, Leaf):
                cols["feature"][i], cols["left"][i], cols["right"][i] = -1, -1, -1
                cols["threshold"][i] = 0.0
                cols["value"][i], cols["n_samples"][i] = node.value, node.n_samples
            else:
                cols["feature"][i], cols["threshold"][i] = node.feature, node.threshold
                cols["left"][i] = visit(node.left)
                cols["right"][i] = visit(node.right)
                cols["value"][i] = 0.0
                cols["n_samples"][i] = 0
            return i

        visit(root)
        return cls._from_lists(cols)

    @classmethod
    def _from_lists(cls, cols) -> "Tree":
        return cls(
            feature=np.array(cols["feature"], dtype=np.int64),
            threshold=np.array(cols["threshold"], dtype=float),
            left=np.array(cols["left"], dtype=np.int64),
            right=np.array(cols["right"], dtype=np.int64),
            value=np.array(cols["value"], dtype=float),
            n_samples=np.array(cols["n_samples"], dtype=np.int64),
        )


def _grow(X, y, w, c, params, k, rng):
    """Depth-first CART growth. Returns (tree, per-feature impurity decrease)."""
    n_features = X.shape[1]
    cols = {k_: [] for k_ in ("feature", "threshold", "left", "right", "value", "n_samples")}
    decrease = np.zeros(n_features)
    root_w = w.sum()

    def new_node():
        for col in cols.values():
            col.append(0)
        return len(cols["feature"]) - 1

    stack = [(new_node(), np.arange(y.size), 0)]
    while stack:
        nid, idx, depth = stack.pop()
        wn = w[idx]
        total_w = wn.sum()
        pos_w = (wn * y[idx]).sum()
        cols["value"][nid] = pos_w / total_w
        cols["n_samples"][nid] = int(c[idx].sum())
        cols["feature"][nid] = cols["left"][nid] = cols["right"][nid] = -1
        cols["threshold"][nid] = 0.0
        if pos_w == 0.0 or pos_w == total_w:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if k == n_features:
            feats = range(n_features)
        else:
            feats = np.sort(rng.choice(n_features, size=k, replace=False))
        split = best_split(X[idx], y[idx], feats, params.min_samples_leaf, wn, c[idx])
        if split is None:
            continue
        parent_g = _gini_from(pos_w, total_w)
        decrease[split.feature] += total_w * (parent_g - split.impurity) / root_w
        go_left = X[idx, split.feature] <= split.threshold
        lid, rid = new_node(), new_node()
        cols["feature"][nid], cols["threshold"][nid] = split.feature, split.threshold
        cols["left"][nid], cols["right"][nid] = lid, rid
        stack.append((rid, idx[~go_left], depth + 1))
        stack.append((lid, idx[go_left], depth + 1))
    return Tree._from_lists(cols), decrease


def _class_weights(y, mode):
    if mode is None:
        return np.ones(2)
    n = y.size
    n_pos = int(np.count_nonzero(y))
    return np.array([n / (2.0 * (n - n_pos)), n / (2.0 * n_pos)])


def grow_tree(X, y, params: ForestParams, rng=None, counts=None):
    """Grow one tree on ``X``/``y`` (``counts`` = row multiplicities)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ArgumentError("cannot grow a tree on zero rows")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    c = np.ones(y.size, dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    cw = _class_weights(y, params.class_weight) if params.class_weight else np.ones(2)
    w = c * cw[y]
    tree, _ = _grow(X, y.astype(float), w, c, params, params.resolve_features(X.shape[1]), rng)
    return tree


@dataclass(eq=False)
class ForestModel:
    trees: list
    feature_names: list
    params: ForestParams
    importances: np.ndarray
    importance_defined: bool = True
    n_train: int = 0
    train_prevalence: float = 0.0
    extra: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ForestModel):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.params == other.params
            and np.array_equal(self.importances, other.importances)
            and self.importance_defined == other.importance_defined
            and len(self.trees) == len(other.trees)
            and all(a == b for a, b in zip(self.trees, other.trees))
        )

    __hash__ = None

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _train_one(X, y, params, k, class_w, seq):
    rng = np.random.Generator(np.random.PCG64(seq))
    n = y.size
    if params.bootstrap:
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        keep = np.flatnonzero(counts)
        Xb, yb, cb = X[keep], y[keep], counts[keep]
    else:
        Xb, yb, cb = X, y, np.ones(n, dtype=np.int64)
    w = cb * class_w[yb]
    return _grow(Xb, yb.astype(float), w, cb, params, k, rng)


def train_forest(X, y, params: ForestParams, feature_names=None, threads: int = 1) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ArgumentError("X must be (n_rows, n_features) matching y")
    if not np.isfinite(X).all():
        raise ArgumentError("X contains non-finite values; impute before training")
    classes = set(np.unique(y).tolist())
    if classes != {0, 1}:
        raise TrainingError(f"training labels must contain both classes 0 and 1, found {sorted(classes)}")
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(X.shape[1])]
    if len(feature_names) != X.shape[1]:
        raise ArgumentError("feature_names length does not match X")
    k = params.resolve_features(X.shape[1])
    class_w = _class_weights(y, params.class_weight)
    seqs = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    if threads > 1 and params.n_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _train_one(X, y, params, k, class_w, s), seqs))
    else:
        results = [_train_one(X, y, params, k, class_w, s) for s in seqs]
    trees = [t for t, _ in results]
    total = np.zeros(X.shape[1])
    for _, dec in results:
        total += dec
    defined = total.sum() > 0
    importances = total / total.sum() if defined else np.zeros(X.shape[1])
    return ForestModel(
        trees=trees,
        feature_names=list(feature_names),
        params=params,
        importances=importances,
        importance_defined=bool(defined),
        n_train=int(y.size),
        train_prevalence=float(y.mean()),
    )


def predict_proba(model: ForestModel, X) -> np.ndarray:
    """Mean leaf positive fraction across trees. Accepts one row or a matrix."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ArgumentError(f"row width {X.shape[-1]} != model width {model.n_features}")
    acc = np.zeros(X.shape[0])
    for tree in model.trees:
        acc += tree.predict(X)
    out = acc / len(model.trees)
    return float(out[0]) if single else out


def feature_importance(model: ForestModel) -> list:
    """``(name, weight)`` pairs, descending by weight (stable on column order)."""
    order = sorted(range(model.n_features), key=lambda i: (-model.importances[i], i))
    return [(model.feature_names[i], float(model.importances[i])) for i in order]


def grouped_importance(model: ForestModel, group_of) -> list:
    """Importances summed per source variable, e.g. all ``month_*`` columns together."""
    sums = {}
    for name, w in zip(model.feature_names, model.importances):
        key = group_of(name)
        sums[key] = sums.get(key, 0.0) + float(w)
    return sorted(sums.items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------- serialization

def dumps_model(model: ForestModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "feature_names": model.feature_names,
        "params": asdict(model.params),
        "importances": [float(x) for x in model.importances],
        "importance_defined": model.importance_defined,
        "n_train": model.n_train,
        "train_prevalence": model.train_prevalence,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": [float(x) for x in t.threshold],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": [float(x) for x in t.value],
                "n_samples": t.n_samples.tolist(),
            }
            for t in model.trees
        ],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def loads_model(text: str) -> ForestModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON: {exc.msg} at {exc.pos}") from None
    if doc.get("format") != FORMAT_NAME:
        raise FormatError("not a forest model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {doc.get('format_version')!r}")
    trees = [Tree._from_lists(t) for t in doc["trees"]]
    return ForestModel(
        trees=trees,
        feature_names=list(doc["feature_names"]),
        params=ForestParams(**doc["params"]),
        importances=np.array(doc["importances"], dtype=float),
        importance_defined=bool(doc["importance_defined"]),
        n_train=int(doc["n_train"]),
        train_prevalence=float(doc["train_prevalence"]),
    )
