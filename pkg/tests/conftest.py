import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


import numpy as np
import pytest

from ftcencoder.datapipe import DEFAULT_STRATA, GenConfig, generate_synthetic, label_segments
from ftcencoder.model import TrainConfig, train

SPLIT = np.datetime64("2018-01-01")


@pytest.fixture(scope="session")
def clean_stratum():
    """One melt-free stratum: 3 training years, 1 validation year, a 50-epoch model."""
    cfg = GenConfig(strata=(DEFAULT_STRATA[0],), melt_rate=0.0)
    scene = generate_synthetic(cfg, n_pixels=24, years=4)
    fit, val = [], []
    for tb, temps in zip(scene.tb, scene.temps):
        early = tb.dates < SPLIT
        fit += label_segments(tb.select(early), temps.select(early))
        val += label_segments(tb.select(~early), temps.select(~early))
    model, log = train(fit, TrainConfig(epochs=50))
    return {"cfg": cfg, "scene": scene, "fit": fit, "val": val, "model": model, "log": log}


@pytest.fixture(scope="session")
def default_scene():
    return generate_synthetic(GenConfig(), n_pixels=200, years=5)
