"""Brain-MRI tumor classification and segmentation toolkit."""

from .classifiers import (
    CnnConfig,
    CompoundScaleConfig,
    Probabilities,
    ScaledDims,
    build_baseline_cnn,
    build_scaled_classifier,
    classify,
    compound_scale,
    predict_class,
)
from .data import (
    DatasetSplit,
    ScanRecord,
    SplitSpec,
    TumorClass,
    load_dataset,
    load_mask_subset,
    split_dataset,
)
from .preprocess import (
    AugmentConfig,
    AugmentDraw,
    PreprocessConfig,
    apply_augment,
    draw_augment,
    normalize,
    resize,
)
from .training import (
    Checkpoint,
    MetricsReport,
    TrainConfig,
    TrainHistory,
    evaluate_classifier,
    evaluate_segmenter,
    load_checkpoint,
    restore_model,
    save_checkpoint,
    select_best,
    train_classifier,
    train_segmenter,
)
from .unet import SegModel, UNetConfig, build_unet, dice, segment, threshold_mask

__version__ = "0.1.0"
