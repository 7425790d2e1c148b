"""Seasonal-threshold freeze/thaw baseline on the normalized polarization ratio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datapipe import LabeledSegment, PixelSeries
from .ndcore import ContractError

DELTA_THRESHOLD = 0.5
OVERRIDE_K = 273.0
MIN_DELTA_NPR = 1e-9


def compute_npr(tb_v, tb_h):
    """(V - H) / (V + H), elementwise."""
    v = np.asarray(tb_v, dtype=np.float64)
    h = np.asarray(tb_h, dtype=np.float64)
    if np.any(~np.isfinite(v)) or np.any(~np.isfinite(h)) or np.any(v + h <= 0):
        raise ContractError("brightness temperatures must be finite with V + H > 0")
    out = (v - h) / (v + h)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NprReference:
    npr_frozen: float
    npr_thawed: float
    scope: str = ""

    @property
    def delta_npr(self) -> float:
        return self.npr_thawed - self.npr_frozen


def estimate_references(segments: list[LabeledSegment], scope: str = "") -> NprReference:
    """Mean NPR over the frozen-labeled and thawed-labeled segment days."""
    days = {0: [], 1: []}
    for seg in segments:
        x = seg.x[:, seg.mask.astype(bool)]
        days[seg.y].append(compute_npr(x[0], x[1]))
    missing = [name for y, name in ((1, "frozen"), (0, "thawed")) if not days[y]]
    if missing:
        raise ContractError(f"{scope or 'references'}: no {' or '.join(missing)} segments to estimate NPR references")
    return NprReference(float(np.mean(np.concatenate(days[1]))), float(np.mean(np.concatenate(days[0]))), scope)


def seasonal_delta(npr, ref: NprReference) -> np.ndarray:
    if not abs(ref.delta_npr) > MIN_DELTA_NPR:
        raise ContractError(
            f"degenerate NPR references{' for ' + ref.scope if ref.scope else ''}: "
            f"npr_frozen={ref.npr_frozen:.6g}, npr_thawed={ref.npr_thawed:.6g}, delta_npr={ref.delta_npr:.3g}")
    return (np.asarray(npr, dtype=np.float64) - ref.npr_frozen) / ref.delta_npr


def seasonal_threshold(series: PixelSeries, ref: NprReference) -> np.ndarray:
    """Boolean thawed flag per day.

    A day is thawed when its normalized NPR departure exceeds 0.5, or when
    both polarizations are above 273 K regardless of the departure.
    """
    delta = seasonal_delta(compute_npr(series.tb_v, series.tb_h), ref)
    warm = (series.tb_v > OVERRIDE_K) & (series.tb_h > OVERRIDE_K)
    return (delta > DELTA_THRESHOLD) | warm
