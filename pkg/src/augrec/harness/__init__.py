"""Synthetic instances, metrics, experiment runner and CLI."""

from .config import ExperimentConfig, parse_seeds, read_config_file
from .experiment import CSV_COLUMNS, TrialRecord, certify, read_csv, run_experiment, run_sweep, run_trial, write_csv
from .generators import (
    CsInstance,
    McInstance,
    degrees_of_freedom,
    ensemble_covariance,
    frame_ensemble,
    gaussian_ensemble,
    gen_cs_instance,
    gen_mc_instance,
    make_rng,
    n_measurements,
)
from .metrics import psnr, rel_err, rel_err_checked
