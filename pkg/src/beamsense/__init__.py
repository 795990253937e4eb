"""Passive indoor separation monitoring from simulated beam-training sweeps."""

from .beamtraining import ProtocolConfig, Snapshot, SweepResult, collect_snapshots, ordered_pairs, run_training
from .classifier import FFNN, Metrics, TrainConfig, evaluate, train
from .codebook import Codebook, beam_width, gain, make_codebook
from .features import (
    AlertArea,
    DatasetSplit,
    SnapshotDataset,
    Standardizer,
    define_alert_areas,
    fit_standardizer,
    split_dataset,
)
from .geometry import Rect
from .harness import SweepGrid, build_dataset, generate_dataset, ingest_external, run_sweep
from .propagation import ChannelParams, PathContribution, fspl_db, rss, trace_paths
from .rl import BehaviorModel, CriticCNN, RLConfig, critic_score, rl_train, simulate_reaction
from .scene import (
    LABEL_COMPLIANCE,
    LABEL_VIOLATION,
    Arrangement,
    Device,
    Environment,
    Person,
    Scene,
    ScenarioConfig,
    build_scenario,
    label_of,
    sample_arrangement,
)

__version__ = "0.1.0"
