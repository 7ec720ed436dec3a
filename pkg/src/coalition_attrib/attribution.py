"""Shapley feature attributions for regression models.

Features are the players. The worth of a feature subset ``S`` for one
instance ``x`` is the interventional expectation

    v(S) = mean over background rows b of f(x_S, b_rest)

so ``v(empty)`` is the mean background prediction and ``v(all) = f(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import ordered_map
from ._validation import as_matrix, feature_names_of
from .exceptions import InsufficientDataError, SchemaError, SizeLimitError, ValidationError
from .game import CoalitionGame, mask_of, shapley_by_subsets, shapley_from_tables

MAX_EXACT_FEATURES = 15
DEFAULT_BACKGROUND_CAP = 100
# hybrid rows per model call in the generic path
_ROW_BUDGET = 1 << 17
# instances per work item; fixed so results do not depend on the thread count
_INSTANCE_CHUNK = 64


def predict_fn(model):
    """Callable mapping an ``(n, p)`` array to ``n`` predictions."""
    if hasattr(model, "predict"):
        return model.predict
    if callable(model):
        return model
    raise ValidationError(f"{type(model).__name__} is neither callable nor has predict()")


def _evaluate(model, rows):
    out = np.asarray(predict_fn(model)(rows), dtype=np.float64).reshape(-1)
    if out.shape[0] != rows.shape[0]:
        raise SchemaError(f"model returned {out.shape[0]} predictions for {rows.shape[0]} rows")
    return out


def select_background(X, cap=DEFAULT_BACKGROUND_CAP, seed=0):
    """All rows when there are at most ``cap``; else ``cap`` rows by seeded shuffle.

    Selected rows keep their original relative order.
    """
    X = as_matrix(X, "background")
    if cap is None or X.shape[0] <= cap:
        return X
    if cap < 1:
        raise ValidationError(f"background cap must be >= 1, got {cap}")
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = np.sort(rng.permutation(X.shape[0])[:cap])
    return X[rows]


def _check_instance(instance, background):
    x = np.asarray(instance, dtype=np.float64).reshape(-1)
    if x.shape[0] != background.shape[1]:
        raise SchemaError(
            f"instance has {x.shape[0]} features, background has {background.shape[1]}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("instance contains non-finite values")
    return x


def _hybrids(x, background, masks):
    """Rows ``(len(masks) * m, p)``: block ``k`` takes ``x`` on ``masks[k]``."""
    p = background.shape[1]
    bits = (np.asarray(masks)[:, None] >> np.arange(p)) & 1
    blocks = np.where(bits[:, None, :].astype(bool), x[None, None, :], background[None, :, :])
    return blocks.reshape(-1, p)


def _masked_values(model, x, background, masks):
    m = background.shape[0]
    step = max(1, _ROW_BUDGET // m)
    out = []
    for start in range(0, len(masks), step):
        chunk = masks[start:start + step]
        preds = _evaluate(model, _hybrids(x, background, chunk))
        out.append(preds.reshape(len(chunk), m).mean(axis=1))
    return np.concatenate(out)


def coalition_value(model, instance, subset, background):
    """Interventional worth of ``subset`` (iterable of feature indices or a bitmask)."""
    background = as_matrix(background, "background")
    x = _check_instance(instance, background)
    p = background.shape[1]
    mask = subset if isinstance(subset, (int, np.integer)) else mask_of(subset)
    if mask < 0 or mask >> p:
        raise ValidationError(f"subset {subset!r} is not within the {p} features")
    return float(_masked_values(model, x, background, np.array([mask]))[0])


def coalition_table(model, instances, background):
    """Worth of all ``2**p`` subsets for every instance, shape ``(n, 2**p)``.

    Uses the model's own ``coalition_evaluator`` when it has one (tree
    ensembles), else evaluates hybrid rows.
    """
    instances = as_matrix(instances, "instances")
    background = as_matrix(background, "background")
    p = background.shape[1]
    if instances.shape[1] != p:
        raise SchemaError(f"instances have {instances.shape[1]} features, background has {p}")
    masks = np.arange(1 << p)
    fast = None
    if hasattr(model, "coalition_evaluator"):
        fast = model.coalition_evaluator(background)

    def work(start):
        block = instances[start:start + _INSTANCE_CHUNK]
        if fast is not None:
            return fast(block)
        return np.stack([_masked_values(model, x, background, masks) for x in block])

    return np.concatenate(ordered_map(work, range(0, instances.shape[0], _INSTANCE_CHUNK)))


def _check_exact_size(p, limit):
    if p > limit:
        raise SizeLimitError("exact attribution", p, limit,
                             "use shap_sampled for this many features")


def induced_game(model, instance, background, feature_names=None):
    background = as_matrix(background, "background")
    x = _check_instance(instance, background)
    p = background.shape[1]
    _check_exact_size(p, MAX_EXACT_FEATURES)
    names = feature_names or [f"x{j}" for j in range(p)]
    worth = _masked_values(model, x, background, np.arange(1 << p))
    return CoalitionGame(tuple(names), worth)


def shap_exact(model, instance, background, max_features=MAX_EXACT_FEATURES):
    """Exact Shapley attribution of one instance by subset enumeration."""
    background = as_matrix(background, "background")
    _check_exact_size(background.shape[1], max_features)
    return np.array(shapley_by_subsets(induced_game(model, instance, background)).values)


def shap_sampled(model, instance, background, n_permutations, rng=None, return_se=False):
    """Monte Carlo over join orders.

    Each sampled order contributes one marginal gain per feature; the estimate
    is their mean. With ``return_se`` also returns the per-feature standard
    error ``std / sqrt(n_permutations)``.
    """
    if n_permutations < 1:
        raise ValidationError(f"n_permutations must be >= 1, got {n_permutations}")
    background = as_matrix(background, "background")
    x = _check_instance(instance, background)
    rng = _as_generator(rng)
    p = background.shape[1]

    orders = rng.permuted(np.tile(np.arange(p), (n_permutations, 1)), axis=1)
    after = np.cumsum(1 << orders, axis=1)
    before = after - (1 << orders)
    visited = np.unique(np.concatenate([before.ravel(), after.ravel()]))
    worth = dict(zip(visited.tolist(), _masked_values(model, x, background, visited)))
    lookup = np.vectorize(worth.__getitem__, otypes=[np.float64])
    gains = np.empty((n_permutations, p))
    np.put_along_axis(gains, orders, lookup(after) - lookup(before), axis=1)

    estimate = gains.mean(axis=0)
    if not return_se:
        return estimate
    if n_permutations > 1:
        se = gains.std(axis=0, ddof=1) / np.sqrt(n_permutations)
    else:
        se = np.full(p, np.inf)
    return estimate, se


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(0 if rng is None else rng))


@dataclass(frozen=True)
class AttributionResult:
    base_value: float
    attributions: np.ndarray
    feature_names: tuple
    standard_errors: np.ndarray | None = field(default=None, repr=False)

    def mean_abs(self):
        return mean_abs_attribution(self)

    def to_dict(self):
        return {
            "base_value": float(self.base_value),
            "feature_names": list(self.feature_names),
            "per_instance": self.attributions.tolist(),
            "mean_abs": mean_abs_attribution(self).tolist(),
        }


def mean_abs_attribution(result):
    values = np.asarray(result.attributions)
    if values.ndim != 2 or values.shape[0] == 0:
        raise InsufficientDataError("no instances to aggregate")
    return np.abs(values).mean(axis=0)


class ShapleyExplainer(TransformerMixin, BaseEstimator):
    """Explains a fitted regressor by Shapley values over its features.

    ``fit`` takes the reference data from which the background set is drawn;
    ``transform`` returns one row of attributions per instance and
    ``explain`` wraps them with the base value.

    Parameters
    ----------
    model : estimator with ``predict`` or callable
    mode : {"exact", "sampled"}
    n_permutations : int
        Orders sampled per instance in ``sampled`` mode.
    background_cap : int or None
        Largest background set; larger reference data is subsampled.
    random_state : int
        Seeds background subsampling and permutation sampling.
    """

    def __init__(self, model, mode="exact", n_permutations=1000,
                 background_cap=DEFAULT_BACKGROUND_CAP, random_state=0):
        self.model = model
        self.mode = mode
        self.n_permutations = n_permutations
        self.background_cap = background_cap
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.mode not in ("exact", "sampled"):
            raise ValidationError(f"mode must be 'exact' or 'sampled', got {self.mode!r}")
        names = feature_names_of(X)
        self.background_ = select_background(X, self.background_cap, self.random_state)
        self.n_features_in_ = self.background_.shape[1]
        if names is not None:
            self.feature_names_in_ = names
        if self.mode == "exact":
            _check_exact_size(self.n_features_in_, MAX_EXACT_FEATURES)
        self.base_value_ = float(_evaluate(self.model, self.background_).mean())
        return self

    def explain(self, X):
        check_is_fitted(self, "background_")
        names = feature_names_of(X)
        if names is None:
            names = getattr(self, "feature_names_in_", None)
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise SchemaError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if names is None:
            names = [f"x{j}" for j in range(X.shape[1])]
        se = None
        if self.mode == "exact":
            table = coalition_table(self.model, X, self.background_)
            values = shapley_from_tables(table, X.shape[1])
        else:
            # one stream per instance so any instance can be recomputed alone
            seeds = np.random.SeedSequence(self.random_state).spawn(X.shape[0])
            pairs = ordered_map(
                lambda k: shap_sampled(self.model, X[k], self.background_, self.n_permutations,
                                       np.random.Generator(np.random.PCG64(seeds[k])),
                                       return_se=True),
                range(X.shape[0]),
            )
            values = np.array([v for v, _ in pairs])
            se = np.array([s for _, s in pairs])
        return AttributionResult(self.base_value_, values, tuple(str(n) for n in names), se)

    def transform(self, X):
        return self.explain(X).attributions
