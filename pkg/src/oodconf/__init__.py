"""Learned confidence estimates for classifiers, plus an
out-of-distribution detection and evaluation toolkit.

A small two-headed MLP learns, alongside its class predictions, a scalar
confidence that it will get each input right; that confidence doubles as
an OOD detection score. The toolkit adds the max-softmax and ODIN
reference scorers, sign-gradient input preprocessing, exact rank-based
detection metrics, and threshold calibration (including the
misclassified-holdout proxy).
"""

from . import backends
from .data import (DatasetFormatError, GridSpec, LabeledDataset, gen_grid,
                   gen_noise_ood, gen_xor, load_csv, load_features_csv,
                   save_csv, save_features_csv)
from .metrics import (CalibrationError, MetricReport, auroc, aupr, aupr_in,
                      aupr_out, calibrate_threshold,
                      calibrate_threshold_misclassified, detect,
                      detection_error, fpr_at_tpr, metric_report)
from .net import (ForwardTrace, NetworkParams, NetworkSpec, NumericError,
                  OptimizerState, ParamGrads, PredictionOutput, backward,
                  forward, init_network, sgd_step)
from .objective import (BudgetState, LossBreakdown, batch_loss_and_grads,
                        confidence_loss, draw_hint_mask,
                        interpolate_predictions, one_hot, task_loss,
                        total_loss, update_lambda)
from .scorers import (PerturbConfig, ScoredSet, default_epsilon_grid,
                      epsilon_error_table, epsilon_grid_search, max_softmax,
                      preprocess_input, score_batch, score_confidence,
                      score_odin, score_softmax_baseline)
from .trainer import (EvalRecord, ModelFormatError, ModelShapeError,
                      ModelVersionError, TrainConfig, evaluate, load_model,
                      save_model, train)

__version__ = "0.1.0"
