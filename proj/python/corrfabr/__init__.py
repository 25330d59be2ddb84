"""CorrFABR: correlated feature aggregation by region.

Thin Python surface over the C++ core. Everything here is re-exported from
the compiled _corrfabr module.
"""

from corrfabr._corrfabr import (  # noqa: F401
    InputError,
    IoError,
    StainBasis,
    FeatureExtractor,
    CorrNetModel,
    save_tensor,
    load_tensor,
    read_image,
    label_aggressiveness,
    crop_resize_lesion,
    zscore_normalize_lesion,
    otsu_threshold,
    macenko_fit,
    macenko_normalize,
    make_builtin_extractor,
    extract_lowres,
    extract_highres_patches,
    aggregate_region_mean,
    aggregate_region_p95,
    aggregate_pixel_pixel,
    train_fusion,
    corr_loss,
    cca_oracle,
    majority_vote,
    ensemble_average,
    roc_auc,
    confusion_metrics,
    dice,
    kfold_split,
    gen_two_view,
    gen_cohort,
    run_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
