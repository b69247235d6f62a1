"""Brute-force reference implementations used to check the fast code paths.

These deliberately avoid the vectorized machinery in ``forest``, ``evaluation``
and ``geo``: each one enumerates or samples directly.
"""
from __future__ import annotations

import math

import numpy as np

from ..forest import Leaf, Split


def _gini_counts(pos, n):
    p = pos / n
    q = (n - pos) / n
    return 1.0 - p * p - q * q


def oracle_split(X, y, min_samples_leaf=1, features=None):
    """Every feature x every midpoint, scored by counting rows on each side.

    Returns ``(feature, threshold, impurity)`` or ``None``.
    """
    rows = [list(map(float, r)) for r in np.asarray(X)]
    labels = [int(v) for v in np.asarray(y)]
    n = len(labels)
    if n < 2:
        return None
    pos = sum(labels)
    parent = _gini_counts(pos, n)
    if parent <= 0.0:
        return None
    n_features = len(rows[0])
    best = None
    for f in (range(n_features) if features is None else sorted(features)):
        values = sorted({r[f] for r in rows})
        for a, b in zip(values, values[1:]):
            t = 0.5 * (a + b)
            if t >= b:
                t = a
            n_l = pos_l = 0
            for r, lab in zip(rows, labels):
                if r[f] <= t:
                    n_l += 1
                    pos_l += lab
            n_r, pos_r = n - n_l, pos - pos_l
            if n_l < min_samples_leaf or n_r < min_samples_leaf:
                continue
            imp = n_l / n * _gini_counts(pos_l, n_l) + n_r / n * _gini_counts(pos_r, n_r)
            if best is None or imp < best[2]:
                best = (f, t, imp)
    if best is None or not best[2] < parent - 1e-12:
        return None
    return best


def oracle_tree(X, y, max_depth=None, min_samples_leaf=1, depth=0):
    """Deterministic CART: all features at every node, no resampling."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    frac = float(np.count_nonzero(y)) / y.size
    if frac in (0.0, 1.0) or (max_depth is not None and depth >= max_depth):
        return Leaf(frac, int(y.size))
    split = oracle_split(X, y, min_samples_leaf)
    if split is None:
        return Leaf(frac, int(y.size))
    f, t, _ = split
    left = X[:, f] <= t
    return Split(f, t,
                 oracle_tree(X[left], y[left], max_depth, min_samples_leaf, depth + 1),
                 oracle_tree(X[~left], y[~left], max_depth, min_samples_leaf, depth + 1))


def _curve_points(probs, labels):
    """Enumerate thresholds directly: list of (threshold, tp, fp, fn)."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    positive = labels == 1
    out = []
    for t in sorted(set(probs.tolist()), reverse=True):
        pred = probs >= t
        tp = int((pred & positive).sum())
        fp = int((pred & ~positive).sum())
        fn = int((~pred & positive).sum())
        out.append((t, tp, fp, fn))
    return out


def oracle_metrics(probs, labels, cells_per_positive=64):
    """Return ``(thresholds, f1s, ap, auc)`` by enumeration and dense integration."""
    pts = _curve_points(probs, labels)
    n_pos = int(np.count_nonzero(np.asarray(labels) == 1))
    thresholds, f1s, precision, recall = [], [], [1.0], [0.0]
    for t, tp, fp, fn in pts:
        p = tp / (tp + fp)
        r = tp / (tp + fn)
        thresholds.append(t)
        f1s.append(0.0 if tp == 0 else 2 * p * r / (p + r))
        precision.append(p)
        recall.append(r)
    ap = 0.0
    for k in range(1, len(recall)):
        ap += (recall[k] - recall[k - 1]) * precision[k]
    auc = riemann_area(recall, precision, n_cells=n_pos * cells_per_positive)
    return thresholds, f1s, ap, auc


def riemann_area(recall, precision, n_cells=200_000):
    """Midpoint-rule area under the piecewise-linear curve over [min R, max R]."""
    r = np.asarray(recall, dtype=float)
    p = np.asarray(precision, dtype=float)
    lo, hi = r[0], r[-1]
    if hi <= lo:
        return 0.0
    h = (hi - lo) / n_cells
    xs = lo + (np.arange(n_cells) + 0.5) * h
    a = np.searchsorted(r, xs, side="right") - 1
    b = a + 1
    frac = (xs - r[a]) / (r[b] - r[a])
    return float(np.sum(p[a] + frac * (p[b] - p[a])) * h)


def winding_number(lat, lon, ring):
    """Winding number of ``ring`` (sequence of (lat, lon), closed) around a point."""
    wn = 0
    for (y1, x1), (y2, x2) in zip(ring, ring[1:]):
        cross = (x2 - x1) * (lat - y1) - (lon - x1) * (y2 - y1)
        if y1 <= lat < y2 and cross > 0:
            wn += 1
        elif y2 <= lat < y1 and cross < 0:
            wn -= 1
    return wn


def boundary_sample_distance_km(lat, lon, ring, n_samples=10_000):
    """Minimum haversine distance to ``n_samples`` points spread along ``ring``."""
    ring = np.asarray(ring, dtype=float)
    seg = np.diff(ring, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.r_[0.0, np.cumsum(lengths)]
    s = np.linspace(0.0, cum[-1], n_samples, endpoint=False)
    k = np.searchsorted(cum, s, side="right") - 1
    t = (s - cum[k]) / lengths[k]
    pts = ring[k] + t[:, None] * seg[k]
    pts = np.vstack([pts, ring])
    r = 6371.0088
    la1, lo1 = math.radians(lat), math.radians(lon)
    la2, lo2 = np.radians(pts[:, 0]), np.radians(pts[:, 1])
    h = np.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * np.cos(la2) * np.sin((lo2 - lo1) / 2) ** 2
    return float((2 * r * np.arcsin(np.sqrt(h))).min())
