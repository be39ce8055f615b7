"""Exercise activity recognition from a single wrist- or ankle-worn accelerometer.

The pipeline: parse wide sensor CSVs, segment into one-second windows,
fuse left/right sides per limb, augment for placement robustness, extract
the 450-feature representation, quantile-normalize, train two boosted
ensembles fused by soft voting, and evaluate with subject-grouped k-fold
cross-validation.
"""

from ._version import __version__
from .augment import augment_dataset, invert_axis, rotate_180_x, transform_window
from .boosting import (
    BinMapper,
    BoostedEnsemble,
    ClassWeighting,
    TrainConfig,
    Tree,
    TreeNode,
    UNWEIGHTED_CONFIG,
    WEIGHTED_CONFIG,
    balanced_weights,
    fit_bins,
    predict_proba,
    soft_vote,
    train_gbdt,
)
from .config import RunConfig, SynthConfig, load_run_config
from .core import (
    ConfigError,
    DataError,
    FeatureVector,
    LabelSet,
    Limb,
    PipelineError,
    Provenance,
    SchemaError,
    Side,
    TriaxialSample,
    TriaxialWindow,
    ValidationError,
    WindowMeta,
    default_label_set,
    validate_window,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    PipelineConfig,
    confusion_matrix,
    group_kfold,
    macro_f1,
    run_cv,
)
from .features import (
    CATALOG,
    CHANNELS,
    ChannelSeries,
    FeatureCatalog,
    FeatureMatrix,
    anova_f_scores,
    derive_channels,
    diff_n,
    dominant_frequencies,
    extract_differential,
    extract_matrix,
    extract_statistical,
    extract_window,
    katz_fd,
    petrosian_fd,
)
from .ingest import (
    SensorStream,
    WindowedDataset,
    default_column_map,
    fuse_sides,
    parse_wide_csv,
    window_stream,
    window_streams,
)
from .normalize import QuantileMap, fit_quantile, transform
from .synth import synth_generate

__all__ = [name for name in dir() if not name.startswith("_")]
