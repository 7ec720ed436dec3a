"""Regression trees grown by variance reduction, and bagged forests of them.

Trees are stored as flat node arrays (``feature == -1`` marks a leaf) so that
growing and traversal run in compiled kernels.
"""

from dataclasses import asdict, dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import ordered_map
from ._validation import as_matrix, as_vector, check_features, feature_names_of
from .exceptions import ValidationError

LEAF = -1


@numba.njit(cache=True, nogil=True)
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _best_split(X, y, idx, start, end, features, min_leaf):
    """Scan every boundary between distinct sorted values.

    Returns (feature, threshold, gain) with feature == -1 when no boundary
    leaves ``min_leaf`` rows on both sides. Ties keep the earlier feature in
    ``features`` (ascending) and then the lower threshold.
    """
    m = end - start
    total = 0.0
    for k in range(start, end):
        total += y[idx[k]]
    mean = total / m

    best_feature = -1
    best_threshold = 0.0
    best_proxy = -1.0
    vals = np.empty(m)
    ys = np.empty(m)
    for f in features:
        for k in range(m):
            vals[k] = X[idx[start + k], f]
        order = np.argsort(vals, kind="mergesort")
        csum = 0.0
        for k in range(m):
            ys[k] = y[idx[start + order[k]]] - mean
        ctot = 0.0
        for k in range(m):
            ctot += ys[k]
        for k in range(m - 1):
            csum += ys[k]
            n_left = k + 1
            n_right = m - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            lo = vals[order[k]]
            hi = vals[order[k + 1]]
            if not lo < hi:
                continue
            rest = ctot - csum
            proxy = csum * csum / n_left + rest * rest / n_right
            if proxy > best_proxy:
                best_proxy = proxy
                best_feature = f
                threshold = lo + (hi - lo) / 2.0
                if not threshold < hi:
                    threshold = lo
                best_threshold = threshold
    gain = 0.0
    if best_feature >= 0:
        ctot = 0.0
        for k in range(start, end):
            ctot += y[idx[k]] - mean
        gain = best_proxy - ctot * ctot / m
    return best_feature, best_threshold, gain


@numba.njit(cache=True, nogil=True)
def _grow(X, y, max_depth, min_split, min_leaf, n_try, seed):
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)

    idx = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    state = np.uint64(seed)
    all_features = np.arange(p)
    pool = np.arange(p)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        total = 0.0
        lo = np.inf
        hi = -np.inf
        for k in range(start, end):
            v = y[idx[k]]
            total += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        value[node] = total / m
        count[node] = m

        if m < min_split or m < 2 * min_leaf or lo == hi:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        if n_try < p:
            for k in range(p):
                pool[k] = k
            for k in range(n_try):
                state, r = _splitmix64(state)
                j = k + np.int64(r % np.uint64(p - k))
                tmp = pool[k]
                pool[k] = pool[j]
                pool[j] = tmp
            features = np.sort(pool[:n_try])
        else:
            features = all_features

        f, thr, gain = _best_split(X, y, idx, start, end, features, min_leaf)
        if f < 0:
            continue

        n_left = 0
        n_right = 0
        for k in range(start, end):
            if X[idx[k], f] <= thr:
                buf[n_left] = idx[k]
                n_left += 1
        for k in range(start, end):
            if not X[idx[k], f] <= thr:
                buf[n_left + n_right] = idx[k]
                n_right += 1
        for k in range(m):
            idx[start + k] = buf[k]

        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        stack[top, 0] = right[node]
        stack[top, 1] = start + n_left
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = left[node]
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _predict_forest(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    acc = np.zeros(n)
    n_trees = roots.shape[0]
    for t in range(n_trees):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] != LEAF:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc[i] += value[node]
    return acc / n_trees


@numba.njit(cache=True, nogil=True)
def _coalition_values(instances, background, feature, threshold, left, right, value, roots):
    """Interventional worth of every feature subset, for each instance.

    ``out[i, S]`` is the mean over background rows ``b`` and trees of the
    leaf reached by the hybrid row taking ``instances[i]`` on ``S`` and ``b``
    elsewhere. Instead of materializing the ``2**p`` hybrids, each tree is
    walked once per (instance, background) pair, forking only where the two
    rows disagree on a feature not yet pinned to either side.
    """
    n, p = instances.shape
    m = background.shape[0]
    n_trees = roots.shape[0]
    full = (1 << p) - 1
    out = np.zeros((n, 1 << p))
    stack = np.empty((64 + 2 * feature.shape[0], 3), dtype=np.int64)
    for t in range(n_trees):
        for i in range(n):
            acc = out[i]
            for j in range(m):
                stack[0, 0] = roots[t]
                stack[0, 1] = 0
                stack[0, 2] = 0
                top = 1
                while top > 0:
                    top -= 1
                    node = stack[top, 0]
                    pinned_in = stack[top, 1]
                    pinned_out = stack[top, 2]
                    while feature[node] != LEAF:
                        f = feature[node]
                        bit = 1 << f
                        x_left = instances[i, f] <= threshold[node]
                        b_left = background[j, f] <= threshold[node]
                        if pinned_in & bit:
                            go_left = x_left
                        elif pinned_out & bit or x_left == b_left:
                            go_left = b_left
                        else:
                            # background branch continues here, instance branch is deferred
                            stack[top, 0] = left[node] if x_left else right[node]
                            stack[top, 1] = pinned_in | bit
                            stack[top, 2] = pinned_out
                            top += 1
                            pinned_out |= bit
                            go_left = b_left
                        node = left[node] if go_left else right[node]
                    leaf = value[node]
                    free = full & ~(pinned_in | pinned_out)
                    sub = free
                    while True:
                        acc[pinned_in | sub] += leaf
                        if sub == 0:
                            break
                        sub = (sub - 1) & free
    return out / (m * n_trees)


@numba.njit(cache=True, nogil=True)
def _leaf_boxes(feature, threshold, left, right, roots, n_features):
    """Axis-aligned region ``lo < x <= hi`` of every leaf, plus its tree index."""
    n_nodes = feature.shape[0]
    lo = np.full((n_nodes, n_features), -np.inf)
    hi = np.full((n_nodes, n_features), np.inf)
    tree_of = np.empty(n_nodes, dtype=np.int64)
    is_leaf = np.zeros(n_nodes, dtype=np.bool_)
    stack = np.empty(n_nodes, dtype=np.int64)
    for t in range(roots.shape[0]):
        stack[0] = roots[t]
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            tree_of[node] = t
            f = feature[node]
            if f == LEAF:
                is_leaf[node] = True
                continue
            for child in (left[node], right[node]):
                lo[child] = lo[node]
                hi[child] = hi[node]
                stack[top] = child
                top += 1
            hi[left[node], f] = min(hi[node, f], threshold[node])
            lo[right[node], f] = max(lo[node, f], threshold[node])
    leaves = np.flatnonzero(is_leaf)
    return leaves, lo[leaves], hi[leaves], tree_of[leaves]


@numba.njit(cache=True, nogil=True)
def _inside_mask(row, lo, hi):
    mask = 0
    for f in range(row.shape[0]):
        if lo[f] < row[f] <= hi[f]:
            mask |= 1 << f
    return mask


@numba.njit(cache=True, nogil=True)
def _background_fractions(background, lo, hi):
    """``frac[L, T]``: share of background rows inside leaf ``L`` on every feature in ``T``."""
    m, p = background.shape
    n_leaves = lo.shape[0]
    size = 1 << p
    frac = np.zeros((n_leaves, size))
    for leaf in range(n_leaves):
        counts = frac[leaf]
        for j in range(m):
            counts[_inside_mask(background[j], lo[leaf], hi[leaf])] += 1.0
        # superset sums: counts[T] becomes the number of rows whose mask contains T
        for f in range(p):
            bit = 1 << f
            for T in range(size):
                if not T & bit:
                    counts[T] += counts[T | bit]
        for T in range(size):
            counts[T] /= m
    return frac


@numba.njit(cache=True, nogil=True)
def _box_coalition_values(instances, lo, hi, leaf_value, frac, n_trees):
    n, p = instances.shape
    full = (1 << p) - 1
    out = np.zeros((n, 1 << p))
    n_leaves = lo.shape[0]
    block = 256
    # leaf blocks outermost so each block's boxes stay cache-resident
    for first in range(0, n_leaves, block):
        last = min(first + block, n_leaves)
        for i in range(n):
            acc = out[i]
            x = instances[i]
            for leaf in range(first, last):
                inside = _inside_mask(x, lo[leaf], hi[leaf])
                v = leaf_value[leaf]
                row = frac[leaf]
                sub = inside
                while True:
                    share = row[full ^ sub]
                    if share != 0.0:
                        acc[sub] += v * share
                    if sub == 0:
                        break
                    sub = (sub - 1) & inside
    return out / n_trees


# Largest leaf-by-subset table the box method may allocate.
BOX_TABLE_LIMIT = 1 << 25


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    features_per_split: float = 1.0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        _check_growth_params(self.max_depth, self.min_samples_split,
                             self.min_samples_leaf, self.features_per_split)
        if int(self.n_trees) < 1:
            raise ValidationError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    def as_dict(self):
        return asdict(self)


def _check_growth_params(max_depth, min_samples_split, min_samples_leaf, features_per_split):
    if max_depth is not None and max_depth < 0:
        raise ValidationError(f"max_depth must be >= 0 or None, got {max_depth}")
    if min_samples_split < 2:
        raise ValidationError(f"min_samples_split must be >= 2, got {min_samples_split}")
    if min_samples_leaf < 1:
        raise ValidationError(f"min_samples_leaf must be >= 1, got {min_samples_leaf}")
    if not 0 < features_per_split <= 1:
        raise ValidationError(f"features_per_split must be in (0, 1], got {features_per_split}")


@dataclass(frozen=True)
class TreeArrays:
    """Node arrays of one fitted tree; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    n_features: int

    @property
    def node_count(self):
        return len(self.feature)

    @property
    def leaf_values(self):
        return self.value[self.feature == LEAF]

    def to_dict(self, node=0):
        """Nested node objects, for debugging dumps."""
        if self.feature[node] == LEAF:
            return {"value": float(self.value[node]), "n_samples": int(self.n_samples[node])}
        return {
            "feature_index": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }


def _features_to_try(fraction, p):
    return max(1, int(fraction * p))


def grow_tree(X, y, max_depth=None, min_samples_split=2, min_samples_leaf=1,
              features_per_split=1.0, seed=0):
    """Grow one tree on validated arrays. ``seed`` drives feature subsampling only."""
    _check_growth_params(max_depth, min_samples_split, min_samples_leaf, features_per_split)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    arrays = _grow(
        X, y,
        -1 if max_depth is None else int(max_depth),
        int(min_samples_split), int(min_samples_leaf),
        _features_to_try(features_per_split, X.shape[1]),
        np.uint64(seed),
    )
    return TreeArrays(*arrays, n_features=X.shape[1])


def _stack(trees):
    offsets = np.cumsum([0] + [t.node_count for t in trees[:-1]]).astype(np.int64)
    shift = lambda a, off: np.where(a >= 0, a + off, a)
    return (
        np.concatenate([t.feature for t in trees]),
        np.concatenate([t.threshold for t in trees]),
        np.concatenate([shift(t.left, o) for t, o in zip(trees, offsets)]),
        np.concatenate([shift(t.right, o) for t, o in zip(trees, offsets)]),
        np.concatenate([t.value for t in trees]),
        offsets,
    )


def tree_seed_sequence(seed, tree_index):
    """Independent stream for tree ``tree_index`` of a forest seeded with ``seed``."""
    return np.random.SeedSequence([int(seed), int(tree_index)])


class _TreeEnsembleMixin:
    def _set_trees(self, trees):
        self.trees_ = trees
        self._flat = _stack(trees)

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = np.ascontiguousarray(check_features(self, X))
        return _predict_forest(X, *self._flat)

    def coalition_evaluator(self, background):
        """Function mapping instances to their worth tables against ``background``.

        Background-dependent work is done once here, so the returned function
        can be called on many instance batches.
        """
        check_is_fitted(self, "trees_")
        background = np.ascontiguousarray(check_features(self, background))
        n_leaves = sum(int(np.sum(t.feature == LEAF)) for t in self.trees_)
        flat = self._flat
        if n_leaves << self.n_features_in_ > BOX_TABLE_LIMIT:
            return lambda X: _coalition_values(
                np.ascontiguousarray(check_features(self, X)), background, *flat)
        feature, threshold, left, right, value, roots = flat
        leaves, lo, hi, _ = _leaf_boxes(feature, threshold, left, right, roots,
                                        self.n_features_in_)
        frac = _background_fractions(background, lo, hi)
        leaf_value = value[leaves]
        return lambda X: _box_coalition_values(
            np.ascontiguousarray(check_features(self, X)), lo, hi, leaf_value, frac, len(roots))

    def coalition_values(self, instances, background):
        """Worth table of shape ``(n_instances, 2**n_features)``.

        ``out[i, S]`` is the mean prediction over hybrid rows taking
        ``instances[i]`` on the features in ``S`` and a background row
        elsewhere. Computed from the leaf regions rather than by predicting
        every hybrid row.
        """
        return self.coalition_evaluator(background)(instances)

    def leaf_value_range(self):
        check_is_fitted(self, "trees_")
        return (min(t.leaf_values.min() for t in self.trees_),
                max(t.leaf_values.max() for t in self.trees_))


class RegressionTree(_TreeEnsembleMixin, RegressorMixin, BaseEstimator):
    """CART regression tree.

    Each split maximizes the weighted reduction in target variance; the
    threshold sits halfway between adjacent distinct values and rows with
    ``x <= threshold`` go left. Leaves predict the mean of their rows.

    Parameters
    ----------
    max_depth : int or None
        None grows until leaves are pure or too small to split.
    min_samples_split, min_samples_leaf : int
    max_features : float in (0, 1]
        Fraction of features drawn (without replacement) at each node.
    random_state : int
        Seeds feature subsampling; irrelevant when ``max_features == 1``.
    """

    def __init__(self, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 max_features=1.0, random_state=0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y):
        names = feature_names_of(X)
        X = as_matrix(X)
        y = as_vector(y, X.shape[0])
        tree = grow_tree(X, y, self.max_depth, self.min_samples_split,
                         self.min_samples_leaf, self.max_features, int(self.random_state))
        self.n_features_in_ = X.shape[1]
        if names is not None:
            self.feature_names_in_ = names
        self._set_trees([tree])
        return self

    @property
    def tree_(self):
        check_is_fitted(self, "trees_")
        return self.trees_[0]


class RandomForest(_TreeEnsembleMixin, RegressorMixin, BaseEstimator):
    """Bagged ensemble of :class:`RegressionTree`; predicts the mean over trees.

    Tree ``t`` draws its bootstrap sample and feature-subsampling seed from
    PCG64 seeded by ``SeedSequence([random_state, t])``, so each tree is
    reproducible on its own and trees may be grown in any order.
    """

    def __init__(self, n_estimators=100, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features=1.0, bootstrap=True, random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    @property
    def config(self):
        return ForestConfig(self.n_estimators, self.max_depth, self.min_samples_split,
                            self.min_samples_leaf, self.max_features, self.bootstrap,
                            int(self.random_state))

    @classmethod
    def from_config(cls, config):
        return cls(config.n_trees, config.max_depth, config.min_samples_split,
                   config.min_samples_leaf, config.features_per_split, config.bootstrap,
                   config.seed)

    def fit(self, X, y):
        config = self.config
        names = feature_names_of(X)
        X = as_matrix(X)
        y = as_vector(y, X.shape[0])
        n = X.shape[0]

        def fit_one(t):
            rng = np.random.Generator(np.random.PCG64(tree_seed_sequence(config.seed, t)))
            if config.bootstrap:
                rows = rng.integers(0, n, size=n)
                Xt, yt = X[rows], y[rows]
            else:
                Xt, yt = X, y
            split_seed = int(rng.integers(0, 2**63))
            return grow_tree(Xt, yt, config.max_depth, config.min_samples_split,
                             config.min_samples_leaf, config.features_per_split, split_seed)

        trees = ordered_map(fit_one, range(config.n_trees))
        self.n_features_in_ = X.shape[1]
        if names is not None:
            self.feature_names_in_ = names
        self._set_trees(trees)
        return self

    def to_dict(self):
        check_is_fitted(self, "trees_")
        return {"config": self.config.as_dict(), "trees": [t.to_dict() for t in self.trees_]}


def fit_tree(X, y, config=ForestConfig(), rng=None):
    """Single tree on the full data under ``config``'s growth limits."""
    seed = 0 if rng is None else int(rng.integers(0, 2**63))
    return RegressionTree(config.max_depth, config.min_samples_split, config.min_samples_leaf,
                          config.features_per_split, seed).fit(X, y)


def fit_forest(X, y, config=ForestConfig()):
    return RandomForest.from_config(config).fit(X, y)


def predict_forest(model, X):
    return model.predict(X)
