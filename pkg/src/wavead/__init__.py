"""Calibrated anomaly detection for multivariate time series.

Wavelet coefficient images feed a small convolutional autoencoder; a
tabular Q-learning agent calibrates the anomaly decision boundary using
synthetic anomalies and Monte-Carlo-dropout uncertainty.
"""

from .autoencoder import (
    ConvAutoencoder,
    ReconResult,
    UncertaintyScore,
    load_checkpoint,
    mc_uncertainty,
    nearest_rank,
    recon_error,
    recon_loss,
    save_checkpoint,
    split_by_uncertainty,
    train_epoch,
)
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, DivergenceError, WaveadError
from .evaluate import (
    baseline_static,
    baseline_threshold,
    compute_metrics,
    detect,
    proxy_labels,
)
from .ingest import (
    NormStats,
    SubsequenceBatch,
    TimeSeries,
    WindowConfig,
    apply_normalize,
    denormalize,
    fit_normalize,
    load_csv,
    sliding_windows,
)
from .nn import Adam
from .qlearning import (
    CalibrationResult,
    RLParams,
    RewardBreakdown,
    apply_action,
    calibrate,
    predict_label,
    q_update,
    reward_acc,
    reward_sep,
    select_action,
    total_reward,
)
from .synth import (
    AnomalySpec,
    LabeledWindow,
    inject,
    inject_cyclic,
    inject_gradual_drift,
    inject_sudden_drift,
    make_benchmark,
)
from .wavelet import (
    DB1,
    CoefficientImage,
    FilterBank,
    coefficient_image,
    dwt_step,
    get_filter_bank,
    inverse_dwt_step,
    max_levels,
    multilevel_dwt,
)

__version__ = "0.1.0"
