"""Subspace alignment and a linear max-margin classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, as_data_matrix, make_rng

__all__ = [
    "SsaModel",
    "principal_directions",
    "ssa_align",
    "LinearClassifier",
    "svm_objective",
    "svm_train",
    "svm_predict",
]


@dataclass(frozen=True)
class SsaModel:
    """Train-side (``t``) and test-side (``u``) principal directions, ``M x d``."""

    t: np.ndarray
    u: np.ndarray
    d: int

    @property
    def alignment(self):
        """``T T^T U``, the map applied to training rows."""
        return self.t @ self.t.T @ self.u

    def transform_train(self, x):
        return as_data_matrix(x) @ self.alignment

    def transform_test(self, x):
        return as_data_matrix(x) @ self.u


def _fix_signs(v):
    # make the largest-magnitude entry of every column positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def principal_directions(x, d, name="x"):
    """Top-``d`` eigenvectors of the covariance of mean-centred ``x``.

    Columns are ordered by decreasing eigenvalue and sign-fixed so that
    repeated calls agree bitwise.
    """
    x = as_data_matrix(x, name)
    if len(x) < d:
        raise ValueError(f"{name} has {len(x)} samples, fewer than d={d}")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / max(len(x) - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1]
    vals, vecs = vals[order], vecs[:, order]
    tol = max(vals[0], 0.0) * x.shape[1] * np.finfo(float).eps
    rank = int(np.sum(vals > tol))
    if rank < d:
        raise ValueError(f"{name} covariance has rank {rank}; at most d={rank} is achievable")
    return _fix_signs(vecs[:, :d])


def ssa_align(train, test, d):
    """Align the training PCA subspace with the test PCA subspace.

    Returns ``X_tr T T^T U`` and ``X_te U`` where ``T`` and ``U`` hold the top
    ``d`` principal directions of the training and test rows.

    Returns
    -------
    z_train, z_test : ndarray, shape (n, d)
    model : SsaModel
    """
    train = as_data_matrix(train, "train")
    test = as_data_matrix(test, "test")
    if train.shape[1] != test.shape[1]:
        raise ValueError("train and test must share the feature count")
    d = int(d)
    if not 1 <= d <= train.shape[1]:
        raise ValueError(f"d must lie in [1, {train.shape[1]}], got {d}")
    model = SsaModel(principal_directions(train, d, "train"), principal_directions(test, d, "test"), d)
    return model.transform_train(train), model.transform_test(test), model


@dataclass(frozen=True)
class LinearClassifier:
    """Binary linear classifier; ``classes[0]`` is the negative side."""

    weights: np.ndarray
    bias: float
    c_penalty: float
    classes: tuple = (1, 2)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("classifier parameters must be finite")
        if not self.c_penalty > 0:
            raise ValueError("c_penalty must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))

    def decision_function(self, x):
        x = as_data_matrix(x)
        if x.shape[1] != self.weights.size:
            raise ValueError(f"classifier expects {self.weights.size} features, got {x.shape[1]}")
        return x @ self.weights + self.bias

    def __eq__(self, other):
        return (isinstance(other, LinearClassifier)
                and np.array_equal(self.weights, other.weights)
                and self.bias == other.bias and self.c_penalty == other.c_penalty
                and self.classes == other.classes)

    __hash__ = None


def svm_objective(w, b, x, y_signed, c_penalty):
    """``0.5 |w|^2 + C * sum(hinge)`` with ``y_signed`` in {-1, +1}."""
    margins = y_signed * (x @ w + b)
    return 0.5 * float(w @ w) + c_penalty * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def _sgd(x, y, c_penalty, rng, eta0, epochs, batch):
    n, m = x.shape
    w = np.zeros(m)
    b = 0.0
    best = (svm_objective(w, b, x, y, c_penalty), w.copy(), b)
    w_avg, b_avg, n_avg = np.zeros(m), 0.0, 0
    t = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            t += 1
            idx = order[start:start + batch]
            xb, yb = x[idx], y[idx]
            viol = yb * (xb @ w + b) < 1.0
            # subgradient of the objective divided by C*N, on a mini-batch
            gw = w / (c_penalty * n) - (yb[viol, None] * xb[viol]).sum(axis=0) / len(idx)
            gb = -yb[viol].sum() / len(idx)
            eta = eta0 / np.sqrt(t)
            w = w - eta * gw
            b = b - eta * gb
            n_avg += 1
            w_avg += (w - w_avg) / n_avg
            b_avg += (b - b_avg) / n_avg
        for cw, cb in ((w, b), (w_avg, b_avg)):
            obj = svm_objective(cw, cb, x, y, c_penalty)
            if obj < best[0]:
                best = (obj, cw.copy(), float(cb))
        if epoch == epochs // 2:
            # restart the running average for the second half (Polyak)
            w_avg, b_avg, n_avg = w.copy(), b, 1
    return best


def svm_train(data, c_penalty=1.0, seed=0, epochs=200, batch=32, step_grid=(0.3, 3.0, 30.0)):
    """Linear soft-margin SVM trained in the primal.

    Minimises ``0.5 |w|^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))`` by
    mini-batch subgradient descent with ``eta0 / sqrt(t)`` steps and seeded
    shuffling. One run is made per initial step in ``step_grid`` and the
    parameters with the lowest training objective seen at any epoch boundary
    (plain or averaged iterate) are returned.

    Parameters
    ----------
    data : LabeledDataset
        Exactly two classes must be present.
    c_penalty : float
    seed : int

    Returns
    -------
    LinearClassifier
    """
    if not isinstance(data, LabeledDataset):
        raise TypeError("data must be a LabeledDataset")
    if not c_penalty > 0:
        raise ValueError("c_penalty must be positive")
    mask = data.labeled_mask
    x, labels = data.x[mask], data.y[mask]
    classes = np.unique(labels)
    if classes.size != 2:
        raise ValueError(f"binary training needs exactly two classes, found {classes.size}")
    y = np.where(labels == classes[1], 1.0, -1.0)
    best = None
    for k, eta0 in enumerate(step_grid):
        run = _sgd(x, y, float(c_penalty), make_rng(seed + k), float(eta0), epochs, batch)
        if best is None or run[0] < best[0]:
            best = run
    return LinearClassifier(best[1], best[2], float(c_penalty), tuple(classes.tolist()))


def svm_predict(model, x):
    """Class ids for the rows of ``x``; scores of exactly 0 go to ``classes[0]``."""
    s = model.decision_function(x)
    return np.where(s > 0, model.classes[1], model.classes[0]).astype(np.int64)
