"""Datasets, synthetic covariate-shift benchmarks and CSV persistence.

Data matrices are plain ``numpy`` arrays of shape ``(n_samples, n_features)``.
Class labels are integers in ``1..C``; samples without a label carry the
sentinel :data:`UNLABELED`.

The four generators reproduce the two-dimensional benchmarks *radial*,
*periodic*, *smooth* and *diagonal*. Each returns a :class:`ShiftedBenchmark`
holding a labelled training split, a target split used for adaptation and a
labelled test split. Target and test are obtained by drawing ``n_test``
samples from the test distribution and cutting the draw in half.

The diagonal entries of the covariance-style parameters are interpreted as
per-axis standard deviations by default; pass ``as_variance=True`` to read
them as variances instead.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._errors import CsvFormatError

__all__ = [
    "UNLABELED",
    "NEGATIVE",
    "POSITIVE",
    "LabeledDataset",
    "ShiftedBenchmark",
    "as_data_matrix",
    "standard_normal",
    "uniform",
    "make_rng",
    "label_radial",
    "label_periodic",
    "label_smooth",
    "label_diagonal",
    "gen_radial",
    "gen_periodic",
    "gen_smooth",
    "gen_diagonal",
    "GENERATORS",
    "write_dataset",
    "read_dataset",
    "csv_io",
    "write_matrix",
    "read_matrix",
    "write_benchmark",
    "read_benchmark",
]

UNLABELED = -1
NEGATIVE = 1
POSITIVE = 2


def as_data_matrix(x, name="x"):
    """Validate and return ``x`` as a finite 2-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class LabeledDataset:
    """A data matrix with one integer label per row.

    Attributes
    ----------
    x : ndarray, shape (n_samples, n_features)
    y : ndarray of int, shape (n_samples,)
        Labels in ``1..C`` or :data:`UNLABELED`.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_data_matrix(self.x).copy()
        y = np.array(self.y)
        if y.ndim != 1 or len(y) != len(x):
            raise ValueError(f"labels must be a vector of length {len(x)}, got shape {y.shape}")
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integers")
        y = y.astype(np.int64)
        bad = (y != UNLABELED) & (y < 1)
        if np.any(bad):
            raise ValueError(f"labels must be >= 1 or UNLABELED ({UNLABELED}); got {y[bad][0]}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self):
        return self.x.shape[0]

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def labeled_mask(self):
        return self.y != UNLABELED

    @property
    def classes(self):
        return np.unique(self.y[self.labeled_mask])

    def unlabeled(self):
        """Return a copy whose labels are all :data:`UNLABELED`."""
        return LabeledDataset(self.x, np.full(self.n_samples, UNLABELED))

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    __hash__ = None


@dataclass(frozen=True)
class ShiftedBenchmark:
    """Training, target and test splits of a covariate-shift problem.

    ``target`` keeps its true labels for diagnostics; adapters must only ever
    see ``target.unlabeled()`` or ``target.x``.
    """

    train: LabeledDataset
    target: LabeledDataset
    test: LabeledDataset
    seed: int = 0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        m = self.train.n_features
        if self.target.n_features != m or self.test.n_features != m:
            raise ValueError("train, target and test must share the feature count")
        if np.any(self.test.y == UNLABELED):
            raise ValueError("test labels must be present")

    @property
    def n_features(self):
        return self.train.n_features


# -- random numbers --------------------------------------------------------

def make_rng(seed):
    """Counter-based generator (Philox) keyed by ``seed``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(int(seed)))


def uniform(rng, size, low=0.0, high=1.0):
    return low + (high - low) * rng.random(size)


def standard_normal(rng, size):
    """Standard normal draws by the Box-Muller transform.

    Both the cosine and sine branches are used, so ``n`` draws consume
    ``2 * ceil(n / 2)`` uniforms.
    """
    n = int(np.prod(size))
    half = (n + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * half)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n].reshape(size)


def _gaussian(rng, n, mean, scale):
    mean = np.asarray(mean, dtype=float)
    return mean + standard_normal(rng, (n, len(mean))) * np.asarray(scale, dtype=float)


def _scale(diag, as_variance):
    diag = np.asarray(diag, dtype=float)
    return np.sqrt(diag) if as_variance else diag


# -- label functions -------------------------------------------------------

def _to_classes(positive):
    return np.where(positive, POSITIVE, NEGATIVE).astype(np.int64)


def label_radial(x):
    """Two cones around the first axis: positive iff ``|x1| > |x2|``."""
    x = np.atleast_2d(x)
    return _to_classes(np.abs(x[:, 0]) > np.abs(x[:, 1]))


def label_periodic(x):
    """Stripes perpendicular to the first axis: positive iff ``sin|x1| > 0``."""
    x = np.atleast_2d(x)
    return _to_classes(np.sin(np.abs(x[:, 0])) > 0)


def label_smooth(x):
    x = np.atleast_2d(x)
    p = (1.0 + np.tanh(x[:, 0] + np.minimum(0.0, x[:, 1]))) / 2.0
    return _to_classes(p > 0.5)


def label_diagonal(x):
    x = np.atleast_2d(x)
    return _to_classes(np.abs(x[:, 1]) > 1.5)


# -- generators ------------------------------------------------------------

def _check_counts(n_train, n_test, even_train=False):
    for name, n in (("n_train", n_train), ("n_test", n_test)):
        if int(n) != n or n < 2:
            raise ValueError(f"{name} must be an integer >= 2, got {n}")
    if n_test % 2:
        raise ValueError(f"n_test must be even so it splits into target and test, got {n_test}")
    if even_train and n_train % 2:
        raise ValueError(f"n_train must be even for a two-component mixture, got {n_train}")


def _assemble(name, seed, x_train, x_target, x_test, label_fn):
    return ShiftedBenchmark(
        train=LabeledDataset(x_train, label_fn(x_train)),
        target=LabeledDataset(x_target, label_fn(x_target)),
        test=LabeledDataset(x_test, label_fn(x_test)),
        seed=seed,
        name=name,
    )


def _split_half(x):
    h = len(x) // 2
    return x[:h], x[h:]


def gen_radial(n_train=500, n_test=500, seed=0, as_variance=False):
    """Radial benchmark: Gaussian clouds at ``(+0.5, 0)`` and ``(-0.5, 0)``."""
    _check_counts(n_train, n_test)
    rng = make_rng(seed)
    scale = _scale([0.2, 0.5], as_variance)
    x_train = _gaussian(rng, n_train, [0.5, 0.0], scale)
    x_target, x_test = _split_half(_gaussian(rng, n_test, [-0.5, 0.0], scale))
    return _assemble("radial", seed, x_train, x_target, x_test, label_radial)


def gen_periodic(n_train=500, n_test=500, seed=0, as_variance=False):
    """Periodic benchmark: clouds at ``(+2pi, 0)`` and ``(-2pi, 0)``."""
    _check_counts(n_train, n_test)
    rng = make_rng(seed)
    scale = _scale([2.0, 0.5], as_variance)
    x_train = _gaussian(rng, n_train, [2 * np.pi, 0.0], scale)
    x_target, x_test = _split_half(_gaussian(rng, n_test, [-2 * np.pi, 0.0], scale))
    return _assemble("periodic", seed, x_train, x_target, x_test, label_periodic)


def gen_smooth(n_train=500, n_test=500, seed=0, as_variance=False):
    """Smooth benchmark: equal two-component Gaussian mixtures.

    Target and test each receive half of the samples drawn from each test
    component.
    """
    _check_counts(n_train, n_test, even_train=True)
    rng = make_rng(seed)
    s_tr = _scale([1.0, 2.0], as_variance)
    s_te = _scale([1.0, 1.0], as_variance)
    x_train = np.vstack([
        _gaussian(rng, n_train // 2, [2.0, 3.0], s_tr),
        _gaussian(rng, n_train // 2, [-2.0, 3.0], s_tr),
    ])
    m = n_test // 2
    a = _gaussian(rng, m, [3.0, -1.0], s_te)
    b = _gaussian(rng, m, [0.0, -1.0], s_te)
    ka, kb = math.ceil(m / 2), m // 2
    x_target = np.vstack([a[:ka], b[:kb]])
    x_test = np.vstack([a[ka:], b[kb:]])
    return _assemble("smooth", seed, x_train, x_target, x_test, label_smooth)


def _diagonal_draw(rng, n, low, high, noise):
    x1 = uniform(rng, n, low, high)
    x2 = x1 + noise * standard_normal(rng, n)
    return np.column_stack([x1, x2])


def gen_diagonal(n_train=500, n_test=500, seed=0, as_variance=False):
    """Diagonal benchmark: noisy samples along ``x2 = x1``.

    Training samples have ``x1`` uniform on ``[0, 3]``, test samples on
    ``[-3, 0]``.
    """
    _check_counts(n_train, n_test)
    rng = make_rng(seed)
    noise = float(_scale([0.2], as_variance)[0])
    x_train = _diagonal_draw(rng, n_train, 0.0, 3.0, noise)
    x_target, x_test = _split_half(_diagonal_draw(rng, n_test, -3.0, 0.0, noise))
    return _assemble("diagonal", seed, x_train, x_target, x_test, label_diagonal)


GENERATORS = {
    "radial": gen_radial,
    "periodic": gen_periodic,
    "smooth": gen_smooth,
    "diagonal": gen_diagonal,
}


# -- CSV persistence -------------------------------------------------------

def _fmt(v):
    return repr(float(v))


def _header(prefix, n):
    return [f"{prefix}{j + 1}" for j in range(n)]


def write_dataset(path, dataset):
    """Write ``dataset`` as ``f1,...,fM,label`` rows (``-1`` = unlabeled)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header("f", dataset.n_features) + ["label"])
        for row, label in zip(dataset.x, dataset.y):
            w.writerow([_fmt(v) for v in row] + [str(int(label))])


def _parse_float(tok, path, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise CsvFormatError(f"cannot parse value {tok!r}", path, lineno) from None
    if not math.isfinite(v):
        raise CsvFormatError(f"non-finite value {tok!r}", path, lineno)
    return v


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file (missing header)", path, 1)
    return path, rows[0], rows[1:]


def read_dataset(path):
    """Read a dataset written by :func:`write_dataset`."""
    path, header, body = _read_rows(path)
    if len(header) < 2 or header[-1].strip() != "label":
        raise CsvFormatError("header must be f1,...,fM,label", path, 1)
    m = len(header) - 1
    xs, ys = [], []
    for i, row in enumerate(body, start=2):
        if not row:
            continue
        if len(row) != m + 1:
            raise CsvFormatError(f"expected {m + 1} fields, found {len(row)}", path, i)
        xs.append([_parse_float(t, path, i) for t in row[:m]])
        lab = _parse_float(row[m], path, i)
        if lab != int(lab) or (lab < 1 and lab != UNLABELED):
            raise CsvFormatError(f"invalid label {row[m]!r}", path, i)
        ys.append(int(lab))
    if not xs:
        raise CsvFormatError("no data rows", path, 2)
    return LabeledDataset(np.array(xs), np.array(ys, dtype=np.int64))


def csv_io(path, mode, dataset=None):
    """Read or write a dataset CSV; ``mode`` is ``"read"`` or ``"write"``."""
    if mode == "write":
        if dataset is None:
            raise ValueError("write mode requires a dataset")
        write_dataset(path, dataset)
        return None
    if mode == "read":
        return read_dataset(path)
    raise ValueError(f"mode must be 'read' or 'write', got {mode!r}")


def write_matrix(path, matrix, prefix="f"):
    """Write a real matrix (weights, masks) with a ``f1,...,fK`` header."""
    matrix = np.atleast_2d(np.asarray(matrix))
    integral = np.issubdtype(matrix.dtype, np.integer) or matrix.dtype == bool
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(prefix, matrix.shape[1]))
        for row in matrix:
            w.writerow([str(int(v)) if integral else _fmt(v) for v in row])


def read_matrix(path):
    path, header, body = _read_rows(path)
    k = len(header)
    out = []
    for i, row in enumerate(body, start=2):
        if not row:
            continue
        if len(row) != k:
            raise CsvFormatError(f"expected {k} fields, found {len(row)}", path, i)
        out.append([_parse_float(t, path, i) for t in row])
    if not out:
        raise CsvFormatError("no data rows", path, 2)
    return np.array(out)


def write_benchmark(directory, bench, keep_target_labels=False):
    """Write ``train.csv``, ``target.csv`` and ``test.csv`` into ``directory``."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"no such directory: {d}")
    write_dataset(d / "train.csv", bench.train)
    write_dataset(d / "target.csv", bench.target if keep_target_labels else bench.target.unlabeled())
    write_dataset(d / "test.csv", bench.test)
    return [d / "train.csv", d / "target.csv", d / "test.csv"]


def read_benchmark(directory, seed=0):
    d = Path(directory)
    return ShiftedBenchmark(
        train=read_dataset(d / "train.csv"),
        target=read_dataset(d / "target.csv"),
        test=read_dataset(d / "test.csv"),
        seed=seed,
        name=str(d),
    )
