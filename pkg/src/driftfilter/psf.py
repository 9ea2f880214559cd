"""Periodic sparse filtering.

PSF replaces the soft absolute value of sparse filtering with a shifted
sinusoid ``1 + eps + sin(H)`` (or cosine) and adds a supervised term. The
learned features are partitioned into one group per class plus a group for
unlabelled samples; the loss subtracts ``lambda_c`` times the activations of
class-``c`` samples on the features of group ``c``::

    loss = sum(Z) - sum_c lambda_c * sum_{i: y_i = c} sum_{j in group c} Z[i, j]

Equivalently every entry of ``Z`` carries the weight ``1 - lambda_c`` inside
its own class block and ``1`` elsewhere, which is what the backward pass
propagates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import UNLABELED, LabeledDataset, as_data_matrix
from .sf import TrainConfig, _gd, _ks_monitor, backward, forward, init_weights

__all__ = [
    "FeatureMask",
    "PsfConfig",
    "EarlyStopRule",
    "build_mask",
    "psf_forward",
    "psf_objective_and_gradient",
    "psf_train",
    "psf_transform",
    "loss_weights",
]


@dataclass(frozen=True)
class FeatureMask:
    """Binary ``(C + 1, L)`` assignment of learned features to groups.

    Row ``c`` (0-based) is the group of class ``c + 1``; the last row is the
    unlabelled group.
    """

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] < 2:
            raise ValueError(f"mask must be (C+1) x L with C >= 1, got shape {m.shape}")
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("mask entries must be 0 or 1")
        if not np.all(m.sum(axis=0) == 1):
            raise ValueError("every learned feature must belong to exactly one group")
        if np.any(m[:-1].sum(axis=1) == 0):
            raise ValueError("every class group must own at least one feature")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def n_classes(self):
        return self.m.shape[0] - 1

    @property
    def n_features(self):
        return self.m.shape[1]

    def group(self, c):
        """Indices of the features owned by class ``c`` (1-based)."""
        return np.flatnonzero(self.m[c - 1])

    def __eq__(self, other):
        return isinstance(other, FeatureMask) and np.array_equal(self.m, other.m)

    __hash__ = None


@dataclass(frozen=True)
class EarlyStopRule:
    """KS-based early stopping over the first ``window`` iterations."""

    window: int = 50
    metric: str = "mean_feature_ks"

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class PsfConfig:
    """PSF hyper-parameters.

    ``lam`` may be a scalar, broadcast to every class once the number of
    classes is known.
    """

    base: TrainConfig = field(default_factory=TrainConfig)
    lam: object = 1.0
    nonlinearity: str = "sin"
    group_sizes: tuple | None = None

    def __post_init__(self):
        if self.nonlinearity not in ("sin", "cos"):
            raise ValueError("nonlinearity must be 'sin' or 'cos'")
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.ndim != 1 or np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("lambda must be a finite non-negative scalar or vector")
        if self.group_sizes is not None:
            sizes = tuple(int(s) for s in self.group_sizes)
            if sum(sizes) != self.base.n_features:
                raise ValueError("group sizes must sum to the learned dimensionality")
            object.__setattr__(self, "group_sizes", sizes)

    def lambdas(self, n_classes):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.size == 1:
            return np.full(n_classes, lam[0])
        if lam.size != n_classes:
            raise ValueError(f"lambda has {lam.size} entries for {n_classes} classes")
        return lam


def build_mask(n_classes, n_features, group_sizes=None):
    """Contiguous feature groups for ``n_classes`` classes plus unlabelled.

    Without ``group_sizes`` the features are split as evenly as possible
    between the class groups and the remainder goes to the unlabelled group.
    """
    if n_classes < 1:
        raise ValueError("need at least one class")
    if group_sizes is None:
        if n_features < n_classes:
            raise ValueError(f"{n_features} features cannot cover {n_classes} classes")
        per = n_features // n_classes
        sizes = [per] * n_classes + [n_features - per * n_classes]
    else:
        sizes = [int(s) for s in group_sizes]
        if len(sizes) != n_classes + 1:
            raise ValueError(f"expected {n_classes + 1} group sizes, got {len(sizes)}")
        if any(s < 0 for s in sizes) or sum(sizes) != n_features:
            raise ValueError(f"group sizes {sizes} do not sum to {n_features}")
        if any(s == 0 for s in sizes[:-1]):
            raise ValueError("every class group needs at least one feature")
    m = np.zeros((n_classes + 1, n_features), dtype=np.int64)
    start = 0
    for g, s in enumerate(sizes):
        m[g, start:start + s] = 1
        start += s
    return FeatureMask(m)


def _nonlinearity(kind):
    if kind == "sin":
        return (lambda h, eps: 1.0 + eps + np.sin(h)), (lambda h, f, eps: np.cos(h))
    return (lambda h, eps: 1.0 + eps + np.cos(h)), (lambda h, f, eps: -np.sin(h))


def psf_forward(w, x, cfg=None):
    cfg = cfg or PsfConfig()
    fn, _ = _nonlinearity(cfg.nonlinearity)
    return forward(w, x, fn, cfg.base.epsilon)


def psf_transform(w, batch, cfg=None):
    """PSF representation of ``batch`` normalised with its own statistics."""
    return psf_forward(w, batch, cfg).z


def loss_weights(y, mask, lambdas):
    """Per-entry weights ``(N, L)`` such that ``loss = sum(weights * Z)``."""
    y = np.asarray(y, dtype=np.int64)
    labeled = y != UNLABELED
    if np.any(labeled & ((y < 1) | (y > mask.n_classes))):
        bad = y[labeled & ((y < 1) | (y > mask.n_classes))][0]
        raise ValueError(f"label {bad} has no group in a mask for {mask.n_classes} classes")
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (mask.n_classes,):
        raise ValueError(f"need {mask.n_classes} lambdas, got shape {lambdas.shape}")
    d = np.ones((len(y), mask.n_features))
    idx = np.flatnonzero(labeled)
    cls = y[idx] - 1
    d[idx] -= lambdas[cls][:, None] * mask.m[cls]
    return d


def psf_objective_and_gradient(w, x, y, mask, cfg=None):
    """PSF loss and its gradient w.r.t. ``W``.

    ``y`` holds class labels ``1..C`` or ``UNLABELED``; unlabelled rows only
    contribute to the l1 term.
    """
    cfg = cfg or PsfConfig()
    x = as_data_matrix(x)
    if len(y) != len(x):
        raise ValueError("labels must align with the rows of x")
    d = loss_weights(y, mask, cfg.lambdas(mask.n_classes))
    fn, dfn = _nonlinearity(cfg.nonlinearity)
    cache = forward(w, x, fn, cfg.base.epsilon)
    loss = float(np.sum(d * cache.z))
    return loss, backward(cache, x, d, dfn, cfg.base.epsilon)


def psf_train(train, target, cfg=None):
    """Fit PSF on the union of labelled training rows and target rows.

    Parameters
    ----------
    train : LabeledDataset
    target : ndarray or LabeledDataset
        Adaptation data; any labels it carries are ignored.
    cfg : PsfConfig

    Returns
    -------
    w : ndarray, shape (L, n_features)
    mask : FeatureMask
    trace : TrainTrace
    """
    cfg = cfg or PsfConfig()
    if not isinstance(train, LabeledDataset):
        raise TypeError("train must be a LabeledDataset")
    x_target = as_data_matrix(target.x if isinstance(target, LabeledDataset) else target, "target")
    if np.any(train.y == UNLABELED):
        raise ValueError("training rows must all be labelled")
    n_classes = int(train.y.max())
    mask = build_mask(n_classes, cfg.base.n_features, cfg.group_sizes)
    x = np.vstack([train.x, x_target])
    y = np.concatenate([train.y, np.full(len(x_target), UNLABELED)])
    d = loss_weights(y, mask, cfg.lambdas(n_classes))
    fn, dfn = _nonlinearity(cfg.nonlinearity)
    eps = cfg.base.epsilon

    def objective(w):
        cache = forward(w, x, fn, eps)
        return float(np.sum(d * cache.z)), backward(cache, x, d, dfn, eps), cache.z

    def loss_only(w):
        return float(np.sum(d * forward(w, x, fn, eps).z))

    w0 = init_weights(cfg.base.n_features, x.shape[1], cfg.base.seed)
    monitor = _ks_monitor(train.n_samples, len(x)) if cfg.base.early_stop else None
    w, trace = _gd(w0, objective, cfg.base, monitor, loss_only)
    return w, mask, trace
