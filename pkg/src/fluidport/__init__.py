"""Fluid-antenna multiple access: correlated alpha-mu channels, port-selection
policies, outage Monte Carlo, and a liquid-network multi-label port classifier.
"""

from .channel import (
    AntennaConfig,
    ChannelRealization,
    CorrelationFactor,
    FadingParams,
    amu_moment,
    build_correlation_matrix,
    envelope_from_gaussians,
    factorize_correlation,
    generate_realization,
    unit_power_rhat,
)
from .dataset import (
    DatasetFormatError,
    DatasetSplit,
    FeatureNormalizer,
    Sample,
    build_dataset,
    export_csv,
    load_dataset,
    relabel,
    save_dataset,
    sequence_features,
    top_m_labels,
)
from .fama import (
    OutageEstimate,
    PolicyJob,
    SinrVector,
    SystemConfig,
    estimate_outage,
    estimate_outage_paired,
    sinr_mrc,
    sinr_per_port,
    wilson_interval,
)
from .hpo import SearchSpace, StudyResult, Trial, class_count_sweep, run_study, sample_trial
from .nn import (
    LiquidPortClassifier,
    ModelSpec,
    PortPredictor,
    TrainConfig,
    load_model,
    load_predictor,
    save_model,
)
from .selection import Policy, PortSets, observed_indices, select_port, select_topk_mrc

__version__ = "0.1.0"
