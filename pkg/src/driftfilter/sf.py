"""Sparse filtering.

The representation of a batch ``X`` (``n_samples x n_features``) under weights
``W`` (``n_learned x n_features``) is computed in four stages::

    H = W X^T                      linear projection, one row per learned feature
    F = sqrt(H**2 + eps)           soft absolute value
    F~ = F / ||F||_row             each learned feature scaled to unit norm over samples
    Z = (F~ / ||F~||_col)^T        each sample scaled to unit norm over features

Training minimises the l1 norm ``sum(Z)`` by full-batch gradient descent.
The gradient is back-propagated through both normalisations by hand; the
same machinery is reused by :mod:`driftfilter.psf` with a different
element-wise nonlinearity and per-entry loss weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._errors import InvariantError, NumericError, TrainingError
from .data import as_data_matrix, make_rng, standard_normal

__all__ = [
    "ForwardCache",
    "TrainConfig",
    "TrainTrace",
    "soft_abs",
    "sf_forward",
    "sf_objective_and_gradient",
    "sf_train",
    "transform",
    "init_weights",
]

DEFAULT_EPSILON = 1e-8


def soft_abs(x, epsilon=DEFAULT_EPSILON):
    """Smooth absolute value ``sqrt(x**2 + epsilon)``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return np.sqrt(np.square(x) + epsilon)


@dataclass(frozen=True)
class ForwardCache:
    """Intermediate quantities of one forward pass.

    ``h``, ``f`` and ``f_tilde`` are ``(L, N)``; ``z`` is ``(N, L)``.
    ``row_norms[l]`` is the norm of learned feature ``l`` over samples and
    ``col_norms[i]`` the norm of sample ``i`` after the row normalisation.
    """

    h: np.ndarray
    f: np.ndarray
    f_tilde: np.ndarray
    z: np.ndarray
    row_norms: np.ndarray
    col_norms: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters shared by SF and PSF training.

    ``early_stop`` is a window length: when set, exactly that many iterations
    are run and the weights with the smallest mean-feature KS distance
    between training-row and target-row representations are returned.
    """

    n_features: int = 2
    epsilon: float = DEFAULT_EPSILON
    step: float = 0.01
    max_iters: int = 500
    seed: int = 0
    early_stop: int | None = None
    line_search: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.early_stop is not None and self.early_stop < 1:
            raise ValueError("early_stop window must be >= 1")


@dataclass
class TrainTrace:
    """Per-iteration record of a training run.

    ``loss[t]`` is the objective at the weights used for step ``t``;
    ``ks[t]`` is filled only when early stopping is enabled.
    """

    loss: list = field(default_factory=list)
    ks: list = field(default_factory=list)
    selected: int = 0
    final_loss: float = float("nan")

    @property
    def iterations(self):
        return len(self.loss)


# -- shared forward / backward -------------------------------------------

def _check_finite(arr, stage):
    if not np.all(np.isfinite(arr)):
        raise NumericError(stage)


def _normalise(f):
    row_norms = np.sqrt(np.sum(f * f, axis=1))
    if np.any(row_norms <= 0):
        raise InvariantError("zero feature norm")
    f_tilde = f / row_norms[:, None]
    col_norms = np.sqrt(np.sum(f_tilde * f_tilde, axis=0))
    if np.any(col_norms <= 0):
        raise InvariantError("zero sample norm")
    z = (f_tilde / col_norms[None, :]).T
    return f_tilde, z, row_norms, col_norms


def forward(w, x, nonlinearity, epsilon):
    """Forward pass with an arbitrary strictly positive nonlinearity.

    ``nonlinearity(h, epsilon)`` maps the projection to ``F``.
    """
    w = np.asarray(w, dtype=float)
    x = as_data_matrix(x)
    if w.ndim != 2 or w.shape[1] != x.shape[1]:
        raise ValueError(f"weights of shape {w.shape} do not match {x.shape[1]} input features")
    with np.errstate(over="ignore", invalid="ignore"):
        h = w @ x.T
    _check_finite(h, "projection")
    f = nonlinearity(h, epsilon)
    _check_finite(f, "nonlinearity")
    f_tilde, z, row_norms, col_norms = _normalise(f)
    _check_finite(z, "normalisation")
    return ForwardCache(h, f, f_tilde, z, row_norms, col_norms)


def backward(cache, x, dz, dnonlinearity, epsilon):
    """Gradient of ``sum(dz * Z)`` w.r.t. ``W``.

    ``dz`` has the shape of ``cache.z``; ``dnonlinearity(h, f, epsilon)``
    returns the element-wise derivative ``dF/dH``.
    """
    g = np.asarray(dz, dtype=float).T  # (L, N)
    f, ft, r, c = cache.f, cache.f_tilde, cache.row_norms, cache.col_norms
    zt = cache.z.T
    # column normalisation: z_.i = ft_.i / c_i
    g_ft = g / c[None, :] - zt * (np.sum(g * zt, axis=0) / c)[None, :]
    # row normalisation: ft_l. = f_l. / r_l
    g_f = g_ft / r[:, None] - ft * (np.sum(g_ft * ft, axis=1) / r)[:, None]
    g_h = g_f * dnonlinearity(cache.h, f, epsilon)
    _check_finite(g_h, "backward")
    return g_h @ np.asarray(x, dtype=float)


def _soft_abs_nl(h, epsilon):
    return np.sqrt(h * h + epsilon)


def _soft_abs_d(h, f, epsilon):
    return h / f


# -- public SF API ---------------------------------------------------------

def sf_forward(w, x, epsilon=DEFAULT_EPSILON):
    """Sparse-filtering forward pass; returns a :class:`ForwardCache`."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return forward(w, x, _soft_abs_nl, epsilon)


def sf_objective_and_gradient(w, x, epsilon=DEFAULT_EPSILON):
    """Return ``(sum(Z), dsum(Z)/dW)``."""
    x = as_data_matrix(x)
    cache = sf_forward(w, x, epsilon)
    loss = float(np.sum(cache.z))
    grad = backward(cache, x, np.ones_like(cache.z), _soft_abs_d, epsilon)
    return loss, grad


def transform(w, batch, epsilon=DEFAULT_EPSILON):
    """Representation of ``batch`` using normalisation statistics of the batch."""
    return sf_forward(w, batch, epsilon).z


def init_weights(n_learned, n_inputs, seed):
    """Entrywise standard-normal weights drawn from the seeded generator."""
    return standard_normal(make_rng(seed), (n_learned, n_inputs))


# -- training loop shared with PSF -----------------------------------------

def _gd(w, objective, cfg, monitor=None, loss_only=None):
    """Full-batch gradient descent.

    ``objective(w) -> (loss, grad, z)``. ``monitor(z)`` returns the early
    stopping metric for the current weights. ``loss_only(w)`` is used by the
    backtracking line search.
    """
    trace = TrainTrace()
    n_iter = cfg.max_iters
    snapshots = None
    if cfg.early_stop is not None:
        if monitor is None:
            raise ValueError("early stopping needs the train/target split of the batch")
        n_iter = min(cfg.early_stop, cfg.max_iters)
        snapshots = []
    for t in range(n_iter):
        try:
            loss, grad, z = objective(w)
        except NumericError as exc:
            raise TrainingError(t, f"{exc} at iteration {t}") from exc
        if not np.isfinite(loss):
            raise TrainingError(t)
        trace.loss.append(loss)
        if snapshots is not None:
            trace.ks.append(float(monitor(z)))
            snapshots.append(w.copy())
        if cfg.line_search:
            w = _backtrack(w, loss, grad, cfg.step, loss_only)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                w = w - cfg.step * grad
        if not np.all(np.isfinite(w)):
            raise TrainingError(t, f"weights became non-finite at iteration {t}")
    if snapshots is not None:
        best = int(np.argmin(trace.ks))
        trace.selected = best
        w = snapshots[best]
        trace.final_loss = trace.loss[best]
    else:
        trace.selected = n_iter
        try:
            trace.final_loss = float(objective(w)[0])
        except NumericError as exc:
            raise TrainingError(n_iter, str(exc)) from exc
        if not np.isfinite(trace.final_loss):
            raise TrainingError(n_iter)
    return w, trace


def _backtrack(w, loss, grad, step, loss_only, shrink=0.5, c=1e-4, max_halvings=40):
    g2 = float(np.sum(grad * grad))
    for _ in range(max_halvings):
        cand = w - step * grad
        try:
            val = loss_only(cand)
        except NumericError:
            val = np.inf
        if np.isfinite(val) and val <= loss - c * step * g2:
            return cand
        step *= shrink
    return w


def sf_train(x_adapt, cfg=None, n_train=None):
    """Fit sparse-filtering weights on ``x_adapt``.

    Parameters
    ----------
    x_adapt : ndarray, shape (n_samples, n_features)
        Training rows followed by target rows.
    cfg : TrainConfig
    n_train : int, optional
        Number of leading training rows; required for early stopping.

    Returns
    -------
    w : ndarray, shape (cfg.n_features, n_features)
    trace : TrainTrace
    """
    cfg = cfg or TrainConfig()
    x = as_data_matrix(x_adapt, "x_adapt")
    w0 = init_weights(cfg.n_features, x.shape[1], cfg.seed)

    def objective(w):
        cache = sf_forward(w, x, cfg.epsilon)
        grad = backward(cache, x, np.ones_like(cache.z), _soft_abs_d, cfg.epsilon)
        return float(np.sum(cache.z)), grad, cache.z

    def loss_only(w):
        return float(np.sum(sf_forward(w, x, cfg.epsilon).z))

    return _gd(w0, objective, cfg, _ks_monitor(n_train, len(x)), loss_only)


def _ks_monitor(n_train, n_total):
    if n_train is None:
        return None
    if not 0 < n_train < n_total:
        raise ValueError("n_train must split the batch into non-empty train and target parts")
    from .metrics import mean_feature_ks

    return lambda z: mean_feature_ks(z[:n_train], z[n_train:]).value
