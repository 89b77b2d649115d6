"""Contrastive CSI similarity learning for fingerprint-based massive MIMO positioning."""

from .channel_sim import ChannelScenario, default_scenario, generate_channel, generate_dataset, sample_positions
from .dataset import FingerprintDatabase, SplitConfig, load_database, save_database, split
from .encoder import CsiEncoder, EncoderConfig, conv_output_shape, load_params, save_params
from .positioning import EvaluationReport, evaluate, predict_dm, predict_wknn
from .preprocess import preprocess
from .similarity import SimilarityMetric, build_fingerprint_index
from .trainer import TrainConfig, train_direct_mapping, train_supcon

__version__ = "0.1.0"
