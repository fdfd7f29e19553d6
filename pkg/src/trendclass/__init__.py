"""Polynomial trend estimation and common-trend classification for multivariate time series."""
from .icons import IconModel, assign_icon, build_features, load_model, save_model, train
from .ingest import CleanDataset, TimeSeriesDataset, parse_dataset, prepare, read_dataset
from .multi import TargetAssignment, classify_to_targets
from .rough import DiscriminantResult, centroid_cluster, classify_by_sign, discriminant_scores, rough_classify
from .state import PipelineState
from .trend import TrendFit, fit_all, ols_fit, select_degree

__version__ = "0.1.0"
