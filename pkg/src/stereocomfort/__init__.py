"""Visual comfort assessment for stereoscopic retargeted image pairs.

Pipeline: load or estimate a disparity map for a stereo pair, compute
comfort features (disparity range, boundary disparity, disparity
distribution irregularity, gradient image-quality statistics), pool them
with an epsilon-SVR against mean opinion scores, and evaluate with repeated
scene-grouped splits. Four retargeting operators (crop, scale, seam, multi)
synthesise test corpora.
"""

from ._accel import NUMBA_ENABLED
from .disparity import (
    COMFORT_ZONE_PX,
    BlockMatchParams,
    ViewingGeometry,
    comfort_zone_pixels,
    estimate_disparity,
)
from .errors import (
    ConvergenceError,
    DataError,
    DecodeError,
    DegenerateDataError,
    DimensionError,
    FormatError,
    InputError,
    ParameterError,
    StereoComfortError,
)
from .features import (
    ComfortZone,
    DidParams,
    DrParams,
    FEATURE_GROUPS,
    FeatureVector,
    boundary_disparity_feature,
    did_feature,
    disparity_range_feature,
    extract_features,
    feature_names,
    group_slices,
    jndd_threshold,
    niq_features,
)
from .imagecore import (
    DisparityMap,
    GrayImage,
    StereoPair,
    load_disparity,
    load_gray,
    load_rgb,
    save_disparity,
    save_gray,
    to_gray,
)
from .manifest import (
    ManifestRow,
    read_features,
    read_labels,
    read_manifest,
    scene_of,
    write_features,
    write_manifest,
)
from .model import (
    EvalReport,
    Metrics,
    MosResult,
    RatedSample,
    SvrModel,
    SvrParams,
    correlation_metrics,
    cross_validate,
    load_model,
    mos_from_ratings,
    predict_svr,
    serialize_model,
    train_svr,
)
from .retarget import (
    RetargetSpec,
    apply_retarget,
    find_vertical_seam,
    gradient_energy,
    stereo_crop,
    stereo_multi_operator,
    stereo_scale,
    stereo_seam_carve,
    synth_corpus,
    synthetic_comfort_label,
)

__version__ = "0.1.0"

__all__ = [
    "BlockMatchParams",
    "COMFORT_ZONE_PX",
    "ComfortZone",
    "ConvergenceError",
    "DataError",
    "DecodeError",
    "DegenerateDataError",
    "DidParams",
    "DimensionError",
    "DisparityMap",
    "DrParams",
    "EvalReport",
    "FEATURE_GROUPS",
    "FeatureVector",
    "FormatError",
    "GrayImage",
    "InputError",
    "ManifestRow",
    "Metrics",
    "MosResult",
    "NUMBA_ENABLED",
    "ParameterError",
    "RatedSample",
    "RetargetSpec",
    "StereoComfortError",
    "StereoPair",
    "SvrModel",
    "SvrParams",
    "ViewingGeometry",
    "apply_retarget",
    "boundary_disparity_feature",
    "comfort_zone_pixels",
    "correlation_metrics",
    "cross_validate",
    "did_feature",
    "disparity_range_feature",
    "estimate_disparity",
    "extract_features",
    "feature_names",
    "find_vertical_seam",
    "gradient_energy",
    "group_slices",
    "jndd_threshold",
    "load_disparity",
    "load_gray",
    "load_model",
    "load_rgb",
    "mos_from_ratings",
    "niq_features",
    "predict_svr",
    "read_features",
    "read_labels",
    "read_manifest",
    "save_disparity",
    "save_gray",
    "scene_of",
    "serialize_model",
    "stereo_crop",
    "stereo_multi_operator",
    "stereo_scale",
    "stereo_seam_carve",
    "synth_corpus",
    "synthetic_comfort_label",
    "to_gray",
    "train_svr",
    "__version__",
]
