"""cutscore: trajectory-based assessment of VR cutting gestures.

Pipeline: ingest tool trajectories, augment them into fixed-length
windows, train a small 1D CNN from scratch, score actions on a 0-10
scale, and compare against classical baselines. See the README for the
CLI surface; the public library API is re-exported here.
"""

from .assessment import (
    ConfusionMatrix,
    ScoreReport,
    evaluate,
    score_action,
    score_window,
    score_windows,
)
from .baselines import (
    BaselineConfig,
    Standardizer,
    fit_logreg,
    fit_svm,
    predict_knn,
    run_baselines,
    windows_to_features,
)
from .network import (
    BatchNormLayer,
    CnnModel,
    ConvLayer,
    batchnorm_forward,
    conv1d_forward,
    dense_softmax,
    global_avg_pool,
    init_model,
    model_backward,
    model_forward,
    predict_proba,
    relu,
)
from .synthgen import SynthConfig, describe, generate, generate_trajectories
from .trajectories import (
    Frame,
    RawTrajectory,
    Window,
    augment_dataset,
    center_window,
    load_dataset,
    parse_trajectory,
    read_windows,
    sample_and_augment,
    write_trajectory,
    write_windows,
)
from .training import (
    AdamState,
    EpochRecord,
    SplitDataset,
    TrainConfig,
    adam_step,
    load_model,
    retrain_transfer,
    save_model,
    sparse_ce_loss,
    split_dataset,
    train,
)

__version__ = "0.1.0"
