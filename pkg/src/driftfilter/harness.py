"""Seeded experiment runner for the synthetic covariate-shift benchmarks.

A :class:`PipelineSpec` names a benchmark, an adapter and a classifier. Each
trial fits a baseline classifier on raw training rows, fits the adapter on
training plus target rows, fits a second classifier on the adapted training
rows and scores both on the test split. Reports are plain data and serialise
deterministically, so identical specs give byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import ssa_align, svm_predict, svm_train
from .data import (
    GENERATORS, UNLABELED, LabeledDataset, read_benchmark, read_matrix,
    write_matrix,
)
from .metrics import accuracy, accuracy_percent_change, median_heuristic, mmd, mmd_percent_change, uar
from .psf import FeatureMask, PsfConfig, psf_train, psf_transform
from .sf import TrainConfig, init_weights, sf_train, transform

__all__ = [
    "ADAPTERS",
    "TRIAL_FIELDS",
    "PipelineSpec",
    "EvalReport",
    "trial_seed",
    "load_benchmark",
    "run_benchmark",
    "emit_report",
    "read_report",
    "export_scatter",
    "grid_search",
    "bench",
    "bench_specs",
    "fit_adapter",
    "save_model",
    "load_model",
    "thread_count",
]

ADAPTERS = ("none", "sf", "psf", "ssa")
TRIAL_FIELDS = (
    "baseline_accuracy",
    "adapted_accuracy",
    "percent_change",
    "mmd_before",
    "mmd_after",
    "mmd_percent_change",
    "baseline_uar",
    "adapted_uar",
)
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_PSF_KEYS = {"lam", "nonlinearity", "group_sizes"}


@dataclass(frozen=True)
class PipelineSpec:
    """One experiment: benchmark, adapter, classifier and trial budget.

    ``adapter_config`` holds :class:`TrainConfig` fields for ``sf``, those plus
    ``lam``/``nonlinearity``/``group_sizes`` for ``psf`` and ``d`` for
    ``ssa``. The adapter seed always comes from the trial seed.

    ``resample_data`` draws a fresh benchmark per trial; by default the
    benchmark is generated once from ``seed`` and trials differ only in the
    adapter initialisation and classifier shuffling.

    ``mmd_before`` selects the space of the pre-adaptation MMD: ``"raw"``
    input features, or ``"initial"`` representations under the untrained
    adapter.
    """

    adapter: str = "none"
    adapter_config: dict = field(default_factory=dict)
    classifier_c: float = 1.0
    benchmark: str = "radial"
    trials: int = 10
    seed: int = 0
    n_train: int = 500
    n_test: int = 500
    resample_data: bool = False
    joint_normalization: bool = False
    mmd_before: str = "raw"
    as_variance: bool = False

    def __post_init__(self):
        if self.adapter not in ADAPTERS:
            raise ValueError(f"adapter must be one of {ADAPTERS}, got {self.adapter!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not self.classifier_c > 0:
            raise ValueError("classifier_c must be positive")
        if self.mmd_before not in ("raw", "initial"):
            raise ValueError("mmd_before must be 'raw' or 'initial'")
        if self.mmd_before == "initial" and self.adapter in ("none", "ssa"):
            raise ValueError("mmd_before='initial' needs a learned adapter")
        allowed = {"none": set(), "sf": _TRAIN_KEYS, "psf": _TRAIN_KEYS | _PSF_KEYS, "ssa": {"d"}}
        unknown = set(self.adapter_config) - allowed[self.adapter] - {"seed"}
        if unknown:
            raise ValueError(f"unknown {self.adapter} config keys: {sorted(unknown)}")
        object.__setattr__(self, "adapter_config", dict(self.adapter_config))

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EvalReport:
    """Per-trial metrics and their mean and standard error.

    ``trials`` is a list of dicts with ``trial``, ``seed`` and every name in
    :data:`TRIAL_FIELDS`. The standard error is the sample standard
    deviation over ``sqrt(trials)``; it is ``None`` for a single trial.
    """

    spec: dict
    trials: list
    mean: dict
    se: dict
    audit: dict = field(default_factory=dict)

    @classmethod
    def from_trials(cls, spec, trials, audit=None):
        mean, se = {}, {}
        for name in TRIAL_FIELDS:
            vals = np.array([t[name] for t in trials], dtype=float)
            mean[name] = float(np.mean(vals))
            se[name] = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else None
        return cls(spec, trials, mean, se, audit or {})

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(d["spec"], d["trials"], d["mean"], d["se"], d.get("audit", {}))


def trial_seed(seed, trial):
    """Derive an independent 32-bit seed from ``(seed, trial)``."""
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1)[0])


def load_benchmark(spec, data_seed=None):
    data_seed = spec.seed if data_seed is None else data_seed
    if spec.benchmark in GENERATORS:
        return GENERATORS[spec.benchmark](spec.n_train, spec.n_test, data_seed, spec.as_variance)
    path = Path(spec.benchmark)
    if not path.is_dir():
        raise ValueError(f"benchmark {spec.benchmark!r} is neither a generator name nor a directory")
    return read_benchmark(path, data_seed)


def _adapter_configs(spec, seed):
    cfg = {k: v for k, v in spec.adapter_config.items() if k != "seed"}
    if spec.adapter == "sf":
        return TrainConfig(**{**cfg, "seed": seed})
    if spec.adapter == "psf":
        base = TrainConfig(**{k: v for k, v in cfg.items() if k in _TRAIN_KEYS}, seed=seed)
        extra = {k: v for k, v in cfg.items() if k in _PSF_KEYS}
        if isinstance(extra.get("group_sizes"), list):
            extra["group_sizes"] = tuple(extra["group_sizes"])
        return PsfConfig(base=base, **extra)
    if spec.adapter == "ssa":
        return int(cfg.get("d", 2))
    return None


def fit_adapter(spec, bench, seed):
    """Fit the adapter of ``spec`` on ``bench``.

    Returns
    -------
    apply : callable
        ``apply(x_train, x_test) -> (z_train, z_test)``.
    model : dict
        ``weights`` and, for PSF, ``mask``; empty for ``none``/``ssa``.
    """
    cfg = _adapter_configs(spec, seed)
    x_tr, x_ta = bench.train.x, bench.target.x
    n_tr = bench.train.n_samples

    def split_apply(fn):
        def apply(a, b):
            if spec.joint_normalization:
                z = fn(np.vstack([a, x_ta, b]))
                return z[:len(a)], z[len(a) + len(x_ta):]
            return fn(a), fn(b)
        return apply

    if spec.adapter == "none":
        return (lambda a, b: (a, b)), {}
    if spec.adapter == "ssa":
        def apply(a, b):
            z_a, z_b, _ = ssa_align(a, b, cfg)
            return z_a, z_b
        return apply, {}
    if spec.adapter == "sf":
        w, trace = sf_train(np.vstack([x_tr, x_ta]), cfg, n_train=n_tr if cfg.early_stop else None)
        fn = lambda batch: transform(w, batch, cfg.epsilon)
        return split_apply(fn), {"weights": w, "trace": trace, "config": cfg}
    w, mask, trace = psf_train(bench.train, x_ta, cfg)
    fn = lambda batch: psf_transform(w, batch, cfg)
    return split_apply(fn), {"weights": w, "mask": mask, "trace": trace, "config": cfg}


def _initial_apply(spec, bench, seed):
    """Representation under the untrained adapter, for ``mmd_before='initial'``."""
    cfg = _adapter_configs(spec, seed)
    base = cfg if isinstance(cfg, TrainConfig) else cfg.base
    w0 = init_weights(base.n_features, bench.n_features, base.seed)
    if spec.adapter == "sf":
        return lambda a, b: (transform(w0, a, base.epsilon), transform(w0, b, base.epsilon))
    return lambda a, b: (psf_transform(w0, a, cfg), psf_transform(w0, b, cfg))


def _baseline(bench, c_penalty, seed):
    """Classifier on raw training rows scored on raw test rows.

    Only ``bench.train`` and ``bench.test`` are read; the audit mode of
    :func:`run_benchmark` checks this by replacing the target split.
    """
    return _scores(bench.train, bench.test, c_penalty, seed)


def _scores(train, test, c_penalty, seed):
    clf = svm_train(train, c_penalty, seed)
    pred = svm_predict(clf, test.x)
    return accuracy(pred, test.y), uar(pred, test.y).value


def _run_trial(spec, trial, shared_bench, audit):
    seed = trial_seed(spec.seed, trial)
    bench = load_benchmark(spec, seed) if spec.resample_data else shared_bench
    # classifiers follow the data: on a fixed benchmark every trial shares
    # the baseline and only the adapter initialisation varies
    clf_seed = seed if spec.resample_data else spec.seed
    base_acc, base_uar = _baseline(bench, spec.classifier_c, clf_seed)
    record = {}
    if audit:
        rng = np.random.default_rng(seed)
        noise = LabeledDataset(rng.normal(size=bench.target.x.shape) * 1e3, bench.target.y)
        again = _baseline(dataclasses.replace(bench, target=noise), spec.classifier_c, clf_seed)
        record["baseline_independent_of_target"] = again == (base_acc, base_uar)
    apply, _ = fit_adapter(spec, bench, seed)
    z_tr, z_te = apply(bench.train.x, bench.test.x)
    if spec.adapter == "none":
        ad_acc, ad_uar = base_acc, base_uar
    else:
        ad_acc, ad_uar = _scores(LabeledDataset(z_tr, bench.train.y),
                                 LabeledDataset(z_te, bench.test.y), spec.classifier_c, clf_seed)
    # one bandwidth, fixed from the raw pooled data, for both MMD values
    sigma, _ = median_heuristic(bench.train.x, bench.test.x)
    if spec.mmd_before == "raw":
        before = mmd(bench.train.x, bench.test.x, sigma).value
    else:
        before = mmd(*_initial_apply(spec, bench, seed)(bench.train.x, bench.test.x), sigma).value
    after = before if spec.adapter == "none" else mmd(z_tr, z_te, sigma).value
    result = {
        "trial": trial,
        "seed": seed,
        "baseline_accuracy": base_acc,
        "adapted_accuracy": ad_acc,
        "percent_change": accuracy_percent_change(base_acc, ad_acc),
        "mmd_before": before,
        "mmd_after": after,
        "mmd_percent_change": mmd_percent_change(before, after),
        "baseline_uar": base_uar,
        "adapted_uar": ad_uar,
    }
    return result, record


def thread_count(default=1):
    raw = os.environ.get("DRIFTFILTER_THREADS")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DRIFTFILTER_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _validate(spec, bench):
    m = bench.n_features
    cfg = _adapter_configs(spec, 0)
    if spec.adapter == "ssa" and not 1 <= cfg <= m:
        raise ValueError(f"SSA subspace d={cfg} does not fit {m} input features")
    if spec.adapter == "psf":
        if np.any(bench.train.y == UNLABELED):
            raise ValueError("PSF needs fully labelled training rows")
        n_classes = int(bench.train.y.max())
        if cfg.group_sizes is None and cfg.base.n_features < n_classes:
            raise ValueError(f"{cfg.base.n_features} learned features cannot cover {n_classes} classes")
        cfg.lambdas(n_classes)
    if bench.test.classes.size < 1 or np.unique(bench.train.y[bench.train.labeled_mask]).size != 2:
        raise ValueError("the classifier needs exactly two classes in the training split")


def run_benchmark(spec, threads=None, audit=False):
    """Run every trial of ``spec`` and aggregate.

    Parameters
    ----------
    spec : PipelineSpec
    threads : int, optional
        Concurrent trials; defaults to ``DRIFTFILTER_THREADS`` or 1.
    audit : bool
        Re-run every baseline with the target split replaced by noise and
        record whether the baseline result changed.

    Returns
    -------
    EvalReport
    """
    bench = load_benchmark(spec)
    _validate(spec, bench)
    threads = thread_count() if threads is None else max(1, int(threads))
    job = lambda t: _run_trial(spec, t, bench, audit)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(job, range(spec.trials)))
    else:
        out = [job(t) for t in range(spec.trials)]
    trials = [r for r, _ in out]
    info = {}
    if audit:
        info["baseline_independent_of_target"] = all(a["baseline_independent_of_target"]
                                                     for _, a in out)
    return EvalReport.from_trials(spec.to_dict(), trials, info)


# -- persistence -----------------------------------------------------------

def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write_text(path, text):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_report(report, fmt, path):
    """Write ``report`` as ``json`` or ``csv``.

    The CSV has one row per trial followed by ``MEAN`` and ``SE`` rows.
    """
    if fmt == "json":
        _write_text(path, _dump_json(report.to_dict()))
    elif fmt == "csv":
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("trial", "seed") + TRIAL_FIELDS)
        for t in report.trials:
            writer.writerow([t["trial"], t["seed"]] + [repr(float(t[k])) for k in TRIAL_FIELDS])
        writer.writerow(["MEAN", ""] + [repr(report.mean[k]) for k in TRIAL_FIELDS])
        writer.writerow(["SE", ""] + ["" if report.se[k] is None else repr(report.se[k])
                                      for k in TRIAL_FIELDS])
        _write_text(path, buf.getvalue())
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return EvalReport.from_dict(json.loads(text))


def export_scatter(data, path, labels=None):
    """Write the first two columns and labels as ``x,y,label`` CSV.

    Returns ``{"rows": n, "truncated": bool}``; ``truncated`` is set when the
    input had more than two columns. Missing labels are written as -1.
    """
    if isinstance(data, LabeledDataset):
        x, y = data.x, data.y
    else:
        x = np.atleast_2d(np.asarray(data, dtype=float))
        y = np.full(len(x), UNLABELED) if labels is None else np.asarray(labels)
    if x.shape[1] < 2:
        raise ValueError("scatter export needs at least two columns")
    if len(y) != len(x):
        raise ValueError("labels must align with the rows")
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("x", "y", "label"))
    for row, lab in zip(x[:, :2], y):
        writer.writerow((repr(float(row[0])), repr(float(row[1])), int(lab)))
    _write_text(path, buf.getvalue())
    return {"rows": len(x), "truncated": x.shape[1] > 2}


def save_model(directory, model, spec):
    """Write ``weights.csv``, ``mask.csv`` (PSF) and ``config.json``."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"no such directory: {d}")
    written = []
    if "weights" in model:
        write_matrix(d / "weights.csv", model["weights"], prefix="w")
        written.append(d / "weights.csv")
    if "mask" in model:
        write_matrix(d / "mask.csv", model["mask"].m, prefix="g")
        written.append(d / "mask.csv")
    config = {"spec": spec.to_dict()}
    trace = model.get("trace")
    if trace is not None:
        config["trace"] = {"iterations": trace.iterations, "selected": trace.selected,
                           "final_loss": trace.final_loss}
    _write_text(d / "config.json", _dump_json(config))
    written.append(d / "config.json")
    return written


def load_model(directory):
    """Inverse of :func:`save_model`: ``(weights, mask_or_None, spec)``."""
    d = Path(directory)
    config = json.loads((d / "config.json").read_text())
    w = read_matrix(d / "weights.csv") if (d / "weights.csv").exists() else None
    mask = FeatureMask(read_matrix(d / "mask.csv")) if (d / "mask.csv").exists() else None
    return w, mask, PipelineSpec.from_dict(config["spec"])


# -- grids and the full comparison -----------------------------------------

def grid_search(spec, grid):
    """Try every combination in ``grid`` and keep the best by target UAR.

    ``grid`` maps ``adapter_config`` keys to candidate values. Selection uses
    the target split's true labels, so it needs a benchmark that keeps them.

    Returns
    -------
    best : PipelineSpec
    scores : list of (adapter_config, target_uar)
    """
    keys = sorted(grid)
    bench = load_benchmark(spec)
    if np.any(bench.target.y == UNLABELED):
        raise ValueError("grid search needs target labels")
    scores = []
    best = None
    for values in itertools.product(*(grid[k] for k in keys)):
        cand = dataclasses.replace(spec, adapter_config={**spec.adapter_config, **dict(zip(keys, values))})
        _validate(cand, bench)
        seed = trial_seed(cand.seed, 0)
        apply, _ = fit_adapter(cand, bench, seed)
        z_tr, z_ta = apply(bench.train.x, bench.target.x)
        clf = svm_train(LabeledDataset(z_tr, bench.train.y), cand.classifier_c, seed)
        score = uar(svm_predict(clf, z_ta), bench.target.y).value
        scores.append((dict(cand.adapter_config), score))
        if best is None or score > best[1]:
            best = (cand, score)
    return best[0], scores


def bench_specs(trials=10, seed=0):
    """The fixed-setting comparison: every adapter on every synthetic benchmark."""
    specs = []
    for name in GENERATORS:
        specs.append(PipelineSpec("sf", {"n_features": 2, "max_iters": 500, "step": 0.01},
                                  1.0, name, trials, seed))
        specs.append(PipelineSpec("psf", {"n_features": 2, "max_iters": 500, "step": 0.01,
                                          "lam": 1.0, "nonlinearity": "sin"},
                                  1.0, name, trials, seed))
        specs.append(PipelineSpec("ssa", {"d": 2}, 3.0, name, trials, seed))
    return specs


def bench(path=None, trials=10, seed=0, threads=None, specs=None):
    """Run :func:`bench_specs` and optionally write one JSON document.

    Every row carries the mean and standard error of each metric.
    """
    specs = bench_specs(trials, seed) if specs is None else specs
    rows = []
    for spec in specs:
        rep = run_benchmark(spec, threads)
        rows.append({"benchmark": spec.benchmark, "adapter": spec.adapter,
                     "classifier_c": spec.classifier_c, "mean": rep.mean, "se": rep.se,
                     "spec": rep.spec})
    doc = {"trials": trials, "seed": seed, "rows": rows}
    if path is not None:
        _write_text(path, _dump_json(doc))
    return doc
