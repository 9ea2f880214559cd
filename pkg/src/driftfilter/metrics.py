"""Two-sample distances and classification metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import DegenerateInputError, UndefinedBaselineError
from .data import as_data_matrix

__all__ = [
    "MetricValue",
    "pairwise_sq_dists",
    "median_heuristic",
    "mmd2",
    "mmd",
    "mmd_percent_change",
    "ks_statistic",
    "mean_feature_ks",
    "accuracy",
    "uar",
    "accuracy_percent_change",
    "wilcoxon_signed_rank",
]


@dataclass(frozen=True)
class MetricValue:
    """A scalar metric together with the estimator settings that produced it."""

    value: float
    meta: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def _val(v):
    return float(v.value) if isinstance(v, MetricValue) else float(v)


def pairwise_sq_dists(a, b, chunk=256):
    """Squared Euclidean distances from explicit differences.

    The expansion ``|a|^2 + |b|^2 - 2 a.b`` cancels catastrophically for
    clouds far from the origin, so rows are differenced directly in chunks.
    """
    out = np.empty((len(a), len(b)))
    for start in range(0, len(a), chunk):
        diff = a[start:start + chunk, None, :] - b[None, :, :]
        out[start:start + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def median_heuristic(a, b=None):
    """Median pairwise Euclidean distance over the pooled sample.

    Returns ``(sigma, degenerate)``; ``sigma`` falls back to 1 when every
    pooled point coincides.
    """
    pool = as_data_matrix(a) if b is None else np.vstack([as_data_matrix(a), as_data_matrix(b)])
    n = len(pool)
    if n < 2:
        return 1.0, True
    d = np.sqrt(pairwise_sq_dists(pool, pool)[np.triu_indices(n, 1)])
    sigma = float(np.median(d))
    if not sigma > 0:
        positive = d[d > 0]
        if positive.size == 0:
            return 1.0, True
        sigma = float(np.median(positive))
    return sigma, False


def mmd2(a, b, bandwidth="median", unbiased=False):
    """Squared MMD with a Gaussian kernel ``exp(-|u - v|^2 / (2 sigma^2))``.

    The default is the biased V-statistic, which is non-negative and exactly
    zero for identical samples. ``bandwidth="median"`` uses the median
    pairwise distance of the pooled sample.
    """
    a = as_data_matrix(a, "a")
    b = as_data_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError("samples must share the feature count")
    degenerate = False
    if isinstance(bandwidth, str):
        if bandwidth != "median":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        sigma, degenerate = median_heuristic(a, b)
    else:
        sigma = float(bandwidth)
        if not sigma > 0:
            raise ValueError("bandwidth must be positive")
    gamma = 1.0 / (2.0 * sigma * sigma)
    kaa = np.exp(-gamma * pairwise_sq_dists(a, a))
    kbb = np.exp(-gamma * pairwise_sq_dists(b, b))
    kab = np.exp(-gamma * pairwise_sq_dists(a, b))
    n, m = len(a), len(b)
    if unbiased:
        if n < 2 or m < 2:
            raise ValueError("the unbiased estimator needs at least two samples per set")
        value = ((kaa.sum() - np.trace(kaa)) / (n * (n - 1))
                 + (kbb.sum() - np.trace(kbb)) / (m * (m - 1))
                 - 2.0 * kab.mean())
    else:
        value = max(kaa.mean() + kbb.mean() - 2.0 * kab.mean(), 0.0)
    meta = {
        "estimator": "unbiased" if unbiased else "biased",
        "kernel": "gaussian",
        "bandwidth": sigma,
        "n_a": n,
        "n_b": m,
    }
    if degenerate:
        meta["degenerate_bandwidth"] = True
    return MetricValue(float(value), meta)


def mmd(a, b, bandwidth="median"):
    """MMD distance: the square root of the biased :func:`mmd2`."""
    sq = mmd2(a, b, bandwidth)
    return MetricValue(math.sqrt(sq.value), {**sq.meta, "squared": False})


def _percent_change(before, after):
    before, after = _val(before), _val(after)
    if before == 0:
        raise UndefinedBaselineError("percent change against a zero baseline is undefined")
    return 100.0 * (after - before) / before


def mmd_percent_change(before, after):
    """``100 * (after - before) / before``; negative means the gap shrank."""
    return _percent_change(before, after)


def accuracy_percent_change(base, adapted):
    return _percent_change(base, adapted)


def _vector(u, name):
    u = np.asarray(u, dtype=float).ravel()
    if u.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return u


def ks_statistic(u, v):
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_u - F_v|``.

    Both empirical CDFs are evaluated at every pooled observation, which is
    where the supremum is attained.
    """
    u = np.sort(_vector(u, "u"))
    v = np.sort(_vector(v, "v"))
    pool = np.concatenate([u, v])
    fu = np.searchsorted(u, pool, side="right") / u.size
    fv = np.searchsorted(v, pool, side="right") / v.size
    return MetricValue(float(np.max(np.abs(fu - fv))), {"n_u": u.size, "n_v": v.size})


def mean_feature_ks(a, b):
    """Average of the per-feature KS statistics.

    A cheap univariate proxy for a multivariate two-sample distance; it
    ignores all dependence between features.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("samples must share the feature count")
    per = [ks_statistic(a[:, j], b[:, j]).value for j in range(a.shape[1])]
    return MetricValue(float(np.mean(per)), {"per_feature": per})


def accuracy(predicted, actual):
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape or actual.size == 0:
        raise ValueError("predicted and actual must be non-empty and of equal length")
    return float(np.mean(predicted == actual))


def uar(predicted, actual, classes=None):
    """Unweighted average recall: the mean of per-class recalls."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape or actual.size == 0:
        raise ValueError("predicted and actual must be non-empty and of equal length")
    present = np.unique(actual)
    classes = present if classes is None else np.asarray(classes)
    missing = np.setdiff1d(classes, present)
    if missing.size:
        raise ValueError(f"recall undefined: class {missing[0]} absent from actual labels")
    recalls = [float(np.mean(predicted[actual == c] == c)) for c in classes]
    return MetricValue(float(np.mean(recalls)), {"recalls": recalls, "classes": classes.tolist()})


def _ranks(x):
    """Average ranks (1-based) with ties sharing the mean of their positions."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(a, b, method="auto", exact_max_n=12):
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped and tied magnitudes receive average ranks.
    The statistic is ``W+``, the sum of ranks of positive differences. The
    p-value is exact (enumeration of all sign assignments) for
    ``n <= exact_max_n`` and otherwise uses the tie-corrected normal
    approximation with continuity correction.

    Returns
    -------
    statistic : float
    p_value : float
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        raise DegenerateInputError("all paired differences are zero")
    n = d.size
    if n < 5:
        raise ValueError(f"need at least 5 non-zero differences, got {n}")
    r = _ranks(np.abs(d))
    w_plus = float(r[d > 0].sum())
    mean = n * (n + 1) / 4.0
    if method == "auto":
        method = "exact" if n <= exact_max_n else "approx"
    if method == "exact":
        # ranks are multiples of 1/2
        r2 = np.rint(2 * r).astype(np.int64)
        obs = abs(int(np.rint(2 * w_plus)) - int(r2.sum()) / 2)
        count = 0
        for signs in itertools.product((0, 1), repeat=n):
            s = int(np.dot(signs, r2))
            if abs(s - r2.sum() / 2) >= obs - 1e-9:
                count += 1
        p = count / 2.0 ** n
    elif method == "approx":
        _, counts = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(counts ** 3 - counts) / 48.0
        if var <= 0:
            raise DegenerateInputError("zero variance of the signed-rank statistic")
        z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
        p = math.erfc(z / math.sqrt(2.0))
    else:
        raise ValueError(f"unknown method {method!r}")
    return w_plus, min(1.0, p)
