from .evaluate import (EvalReport, EvaluationError, SplitConfig, balanced_accuracy, confusion_matrix, logo_eval,
                       model_config, random_split_eval, random_splits)
from .importance import Importance, permutation_importance
from .models import (ClassifierModel, LogisticConfig, ModelError, RBFConfig, fit_logistic, rbf_kernel, smo_binary,
                     train, train_logistic, train_rbf)
from .pca import pca_project
from .table import ID_COLUMNS, FeatureTable, SchemaError, Standardizer, correlation_filter, standardize
