"""Sparse filtering and periodic sparse filtering for covariate-shift adaptation."""

from ._errors import (
    CsvFormatError, DegenerateInputError, DriftFilterError, InvariantError, NumericError,
    TrainingError, UndefinedBaselineError,
)
from .baselines import LinearClassifier, SsaModel, ssa_align, svm_predict, svm_train
from .data import (
    GENERATORS, UNLABELED, LabeledDataset, ShiftedBenchmark, gen_diagonal, gen_periodic,
    gen_radial, gen_smooth, read_benchmark, read_dataset, write_benchmark, write_dataset,
)
from .harness import EvalReport, PipelineSpec, bench, emit_report, export_scatter, run_benchmark
from .metrics import (
    MetricValue, ks_statistic, mean_feature_ks, mmd, mmd2, mmd_percent_change, uar,
    wilcoxon_signed_rank,
)
from .psf import FeatureMask, PsfConfig, build_mask, psf_forward, psf_objective_and_gradient, psf_train
from .sf import ForwardCache, TrainConfig, TrainTrace, sf_forward, sf_objective_and_gradient, sf_train, transform
from .verify import CheckReport, run_suite

__version__ = "0.1.0"
