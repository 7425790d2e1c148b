from .series import (
    FROZEN_MAX_K,
    LAND_COVERS,
    THAWED_MIN_K,
    WATER_BIN_EDGES,
    LabeledSegment,
    PixelSeries,
    StratumKey,
    Stratification,
    TempSeries,
    interpolate_daily,
    label_segments,
    stratify,
    water_bin,
)
from .synthetic import (
    DEFAULT_STRATA,
    GenConfig,
    StratumProfile,
    SyntheticScene,
    degenerate_profile,
    generate_synthetic,
    melt_heavy,
)
