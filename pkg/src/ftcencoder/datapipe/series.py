"""Pixel time series, daily interpolation, temperature labeling and stratification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..ndcore import ContractError

LAND_COVERS = ("OS", "WS", "S", "G", "SI", "B")
UNTRAINED_COVERS = ("SI", "B")
# left-closed bins; the last bin also takes 0.50 itself
WATER_BIN_EDGES = (0.0, 0.05, 0.15, 0.35, 0.50)

FROZEN_MAX_K = 271.0
THAWED_MIN_K = 275.0
MIN_SEGMENT_DAYS = 7


class StratumKey(NamedTuple):
    land_cover: str
    water_bin: int

    @property
    def water_range(self) -> tuple[float, float]:
        return WATER_BIN_EDGES[self.water_bin], WATER_BIN_EDGES[self.water_bin + 1]

    @property
    def trainable(self) -> bool:
        return self.land_cover not in UNTRAINED_COVERS

    def __str__(self) -> str:
        lo, hi = self.water_range
        return f"{self.land_cover}_wf{round(lo * 100):02d}-{round(hi * 100):02d}"

    @classmethod
    def parse(cls, text: str) -> "StratumKey":
        try:
            cover, rng = text.split("_wf")
            lo = int(rng.split("-")[0]) / 100.0
            key = cls(cover, [round(e, 2) for e in WATER_BIN_EDGES].index(lo))
        except (ValueError, IndexError):
            raise ContractError(f"not a stratum key: {text!r}") from None
        if key.land_cover not in LAND_COVERS or str(key) != text:
            raise ContractError(f"not a stratum key: {text!r}")
        return key


def water_bin(fraction: float) -> int | None:
    """Bin index for a water fraction, or None when above the last edge."""
    if not 0.0 <= fraction <= 1.0 or not np.isfinite(fraction):
        raise ContractError(f"water fraction must lie in [0, 1], got {fraction}")
    if fraction > WATER_BIN_EDGES[-1]:
        return None
    for i in range(len(WATER_BIN_EDGES) - 2):
        if fraction < WATER_BIN_EDGES[i + 1]:
            return i
    return len(WATER_BIN_EDGES) - 2


@dataclass
class PixelSeries:
    pixel_id: str
    dates: np.ndarray  # datetime64[D], strictly increasing
    tb_v: np.ndarray
    tb_h: np.ndarray
    observed: np.ndarray = None  # bool per day
    stratum: StratumKey | None = None

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.tb_v = np.asarray(self.tb_v, dtype=np.float64)
        self.tb_h = np.asarray(self.tb_h, dtype=np.float64)
        if self.observed is None:
            self.observed = np.ones(len(self.dates), dtype=bool)
        self.observed = np.asarray(self.observed, dtype=bool)
        n = len(self.dates)
        if not (len(self.tb_v) == len(self.tb_h) == len(self.observed) == n):
            raise ContractError(f"pixel {self.pixel_id}: field lengths differ")
        if n > 1 and np.any(np.diff(self.dates) <= np.timedelta64(0, "D")):
            raise ContractError(f"pixel {self.pixel_id}: dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def is_daily(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.dates) == np.timedelta64(1, "D")))

    def features(self) -> np.ndarray:
        """(3, n) array of V, H and V - H."""
        return np.stack([self.tb_v, self.tb_h, self.tb_v - self.tb_h])

    def select(self, keep: np.ndarray) -> "PixelSeries":
        return PixelSeries(self.pixel_id, self.dates[keep], self.tb_v[keep], self.tb_h[keep],
                           self.observed[keep], self.stratum)


@dataclass
class TempSeries:
    pixel_id: str
    dates: np.ndarray
    soil_k: np.ndarray
    air_k: np.ndarray

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.soil_k = np.asarray(self.soil_k, dtype=np.float64)
        self.air_k = np.asarray(self.air_k, dtype=np.float64)
        if not (len(self.soil_k) == len(self.air_k) == len(self.dates)):
            raise ContractError(f"pixel {self.pixel_id}: field lengths differ")

    def select(self, keep: np.ndarray) -> "TempSeries":
        return TempSeries(self.pixel_id, self.dates[keep], self.soil_k[keep], self.air_k[keep])


@dataclass
class LabeledSegment:
    pixel_id: str
    stratum: StratumKey | None
    start_date: np.datetime64
    x: np.ndarray  # (3, n): V, H, V - H in kelvin
    y: int  # 1 frozen, 0 thawed
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.mask is None:
            self.mask = np.ones(self.x.shape[1], dtype=bool)
        if self.x.ndim != 2 or self.x.shape[0] != 3:
            raise ContractError(f"segment must have 3 channels, got shape {self.x.shape}")
        if self.y not in (0, 1):
            raise ContractError(f"label must be 0 or 1, got {self.y}")
        valid = self.x[:, np.asarray(self.mask, dtype=bool)]
        if valid.shape[1] < MIN_SEGMENT_DAYS:
            raise ContractError(f"segment has {valid.shape[1]} valid days, need {MIN_SEGMENT_DAYS}")
        if not np.allclose(valid[2], valid[0] - valid[1], rtol=0, atol=1e-9):
            raise ContractError("third channel must equal V - H")

    @property
    def length(self) -> int:
        return int(np.count_nonzero(self.mask))


def interpolate_daily(pixel_id: str, dates, tb_v, tb_h, max_gap: int = 3,
                      stratum: StratumKey | None = None) -> list[PixelSeries]:
    """Linear daily interpolation of irregular observations.

    Observation spacings larger than ``max_gap`` days split the record; no
    values are invented across such gaps.
    """
    dates = np.asarray(dates, dtype="datetime64[D]")
    tb_v = np.asarray(tb_v, dtype=np.float64)
    tb_h = np.asarray(tb_h, dtype=np.float64)
    if len(dates) < 2:
        raise ContractError(f"pixel {pixel_id}: need at least 2 observations, got {len(dates)}")
    order = np.argsort(dates, kind="stable")
    dates, tb_v, tb_h = dates[order], tb_v[order], tb_h[order]
    if np.any(np.diff(dates) == np.timedelta64(0, "D")):
        raise ContractError(f"pixel {pixel_id}: duplicate observation dates")

    day = (dates - dates[0]).astype(np.int64)
    breaks = np.flatnonzero(np.diff(day) > max_gap) + 1
    out = []
    for idx in np.split(np.arange(len(day)), breaks):
        d = day[idx]
        grid = np.arange(d[0], d[-1] + 1)
        observed = np.isin(grid, d)
        out.append(PixelSeries(
            pixel_id,
            dates[0] + grid.astype("timedelta64[D]"),
            np.interp(grid, d, tb_v[idx]),
            np.interp(grid, d, tb_h[idx]),
            observed,
            stratum,
        ))
    return out


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Half-open (start, stop) index pairs of True runs."""
    padded = np.concatenate([[False], flags, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def label_segments(tb: PixelSeries, temps: TempSeries, min_len: int = MIN_SEGMENT_DAYS,
                   frozen_max: float = FROZEN_MAX_K, thawed_min: float = THAWED_MIN_K) -> list[LabeledSegment]:
    """Cut peak-winter (y=1) and peak-summer (y=0) training segments.

    A day is frozen when soil and air are both below ``frozen_max`` and thawed
    when both exceed ``thawed_min``; maximal runs of at least ``min_len`` days
    become segments, everything else (shoulder seasons) is dropped.
    """
    if min_len < MIN_SEGMENT_DAYS:
        raise ContractError(f"min_len must be >= {MIN_SEGMENT_DAYS}, got {min_len}")
    if tb.pixel_id != temps.pixel_id:
        raise ContractError(f"pixel mismatch: {tb.pixel_id} vs {temps.pixel_id}")
    if len(tb.dates) != len(temps.dates) or np.any(tb.dates != temps.dates):
        raise ContractError(f"pixel {tb.pixel_id}: TB and temperature dates are not aligned")
    if not tb.is_daily:
        raise ContractError(f"pixel {tb.pixel_id}: TB series is not daily")

    frozen = (temps.soil_k < frozen_max) & (temps.air_k < frozen_max)
    thawed = (temps.soil_k > thawed_min) & (temps.air_k > thawed_min)
    feats = tb.features()
    segments = []
    for label, flags in ((1, frozen), (0, thawed)):
        for start, stop in _runs(flags):
            if stop - start >= min_len:
                segments.append(LabeledSegment(tb.pixel_id, tb.stratum, tb.dates[start],
                                               feats[:, start:stop].copy(), label))
    segments.sort(key=lambda s: s.start_date)
    return segments


@dataclass
class Stratification:
    strata: dict[StratumKey, list[str]]
    excluded: dict[str, str]  # pixel_id -> reason

    def stratum_of(self) -> dict[str, StratumKey]:
        return {p: k for k, pix in self.strata.items() for p in pix}


def stratify(ancillary: dict[str, tuple[str, float]]) -> Stratification:
    """Partition pixels by land cover and water-fraction bin.

    ``ancillary`` maps pixel_id to ``(land_cover, water_fraction)``.  Pixels
    above the last water-fraction edge are excluded and reported.
    """
    strata: dict[StratumKey, list[str]] = {}
    excluded = {}
    for pid in sorted(ancillary):
        cover, wf = ancillary[pid]
        if cover not in LAND_COVERS:
            raise ContractError(f"pixel {pid}: unknown land-cover code {cover!r}")
        b = water_bin(float(wf))
        if b is None:
            excluded[pid] = f"water fraction {wf} above {WATER_BIN_EDGES[-1]}"
            continue
        strata.setdefault(StratumKey(cover, b), []).append(pid)
    return Stratification(dict(sorted(strata.items())), excluded)
