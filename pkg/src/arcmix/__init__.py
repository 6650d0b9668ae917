"""Mixup training, the ARC calibration loss and calibration metrics."""

from .datasets import (
    GaussianClass,
    GaussianMixtureSpec,
    LabeledDataset,
    SplitSpec,
    bayes_error_estimate,
    get_spec,
    load_csv,
    overlap2d,
    ring8,
    sample_dataset,
    split,
    true_posterior,
)
from .harness import ExperimentConfig, export_reliability, export_results, prepare_data, run_grid
from .losses import ArcConfig, BinPartition, arc_loss, arc_loss_averaged, confidences_and_hits, cross_entropy
from .metrics import MetricReport, bayes_decision, brier, ece, evaluate, mce, nll, reliability_bins
from .mixup import MixupBatch, mix_batch, sample_gamma, sample_gammas
from .training import RunResult, train, train_arc_on_validation

__version__ = "0.1.0"
