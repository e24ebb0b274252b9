"""Simulation lab for self-training and contrastive pretraining on a Gaussian
model with an invariant and a spurious feature block."""

__version__ = "0.1.0"

from .model import Domain, ModelParams, decompose, population_second_moment, sample_labeled, stream, w_inv, w_spu
from .augment import augmentation_moments, sample_augmentation
from .contrastive import amplification, asymptotic_limits, bt_closed_form, bt_gradient_train, bt_subspace_bound
from .classify import accuracy_closed_form, accuracy_mc, cl_probe_closed_form, erm_closed_form, probe_gd
from .selftrain import condition_report, st_empirical_run, st_scratch_run, stoc_run
from .analytics import ablation_k, ablation_kappa, phase_sweep, ssl_compare, uda_compare
