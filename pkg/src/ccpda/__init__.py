"""Class-conditional adversarial alignment for partial domain adaptation, on a small numpy autodiff core."""

from .autodiff import Tensor, backward, grad_reverse
from .data import DomainBatch, PdaTaskSpec, SampleSet, batch_sampler, generate_pda_task, load_feature_csv
from .evaluation import ExperimentReport, emit_table, evaluate
from .experiment import ExperimentConfig, load_config, parse_config, run_experiment
from .losses import (LossBreakdown, LossWeights, centroid_alignment_loss, entropy_loss,
                     multiclass_discriminator_loss, selection_loss, total_objective,
                     weighted_classification_loss)
from .model import ModelBundle, classify, discriminate, forward_features, init_model
from .trainer import METHODS, TrainConfig, lr_schedule, mu_schedule, sgd_step, train
from .weighting import CentroidBank, ClassWeights, compute_class_weights, pseudo_label, update_centroids

__version__ = "0.1.0"
