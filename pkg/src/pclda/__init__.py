"""Prediction-constrained supervised topic models.

Library surface: functional modules (model, embed, gradients, train, gibbs,
data, metrics) plus sklearn-style estimators in pclda.estimators and the
``pclda`` command line.
"""

from .embed import EmbedConfig, brute_force_map, map_embed, map_embed_joint
from .errors import (DataFormatError, InvalidParameterError, PCLDAError,
                     TrainingDivergedError, UndefinedMetricError)
from .gradients import (LossBreakdown, ParamGradients, RegConfig,
                        UnconstrainedParams, finite_diff_gradient, pc_loss,
                        pc_loss_grad)
from .model import (Corpus, DocTopicVector, TopicModelParams, dirichlet_logpdf,
                    doc_data_loglik, doc_label_loglik)
from .optim import Adam, AdamConfig
from .train import (LadderRung, TrainConfig, TrainTrace, lambda_ladder,
                    random_init, train_bp_slda, train_ml_slda, train_pc,
                    train_unsupervised)

__version__ = "0.1.0"

__all__ = [
    "Adam", "AdamConfig", "Corpus", "DataFormatError", "DocTopicVector",
    "EmbedConfig", "InvalidParameterError", "LadderRung", "LossBreakdown",
    "PCLDAError", "ParamGradients", "RegConfig", "TopicModelParams",
    "TrainConfig", "TrainTrace", "TrainingDivergedError",
    "UnconstrainedParams", "UndefinedMetricError", "brute_force_map",
    "dirichlet_logpdf", "doc_data_loglik", "doc_label_loglik",
    "finite_diff_gradient", "lambda_ladder", "map_embed", "map_embed_joint",
    "pc_loss", "pc_loss_grad", "random_init", "train_bp_slda",
    "train_ml_slda", "train_pc", "train_unsupervised",
]
