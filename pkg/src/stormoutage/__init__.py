"""Convective storm tracking from radar frames and power-outage damage classification."""

from .cells import StormCell, buffer_geometry, identify_cells
from .clustering import StormCluster, gdbscan
from .features import SLOTS, Dataset, assign_label, extract_features
from .flow import MotionField, estimate_flow
from .forest import RandomForestModel, RfcHyperparams, fit_forest
from .grid import GeoTransform, RadarFrame
from .metrics import classification_metrics, confusion_matrix
from .mlp import MlpConfig, MlpModel, train_mlp
from .smote import SmoteConfig, smote_oversample
from .synthetic import SyntheticSceneConfig, generate_labeled_table, generate_synthetic_sequence, random_scene_config
from .tracking import Track, Tracker, kalman_step, nowcast

__version__ = "0.1.0"
