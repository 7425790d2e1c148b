"""Scoring binary freeze/thaw retrievals against reference labels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ndcore import ContractError

# pixel_id -> (dates datetime64[D], frozen bool)
BinarySet = dict[str, tuple[np.ndarray, np.ndarray]]

ONSET_PERSISTENCE = 5
SMOOTH_DAYS = 5


@dataclass(frozen=True)
class ConfusionMatrix:
    """Frozen is the positive class. Counts may be percentages of the total."""

    tp: float
    tn: float
    fp: float
    fn: float

    @property
    def total(self) -> float:
        return self.tp + self.tn + self.fp + self.fn

    @staticmethod
    def _ratio(a: float, b: float) -> float:
        return a / b if b > 0 else float("nan")

    @property
    def accuracy(self) -> float:
        if self.total <= 0:
            raise ContractError("empty confusion matrix")
        return (self.tp + self.tn) / self.total

    @property
    def recall_frozen(self) -> float:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def recall_thawed(self) -> float:
        return self._ratio(self.tn, self.tn + self.fp)

    @property
    def precision_frozen(self) -> float:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def precision_thawed(self) -> float:
        return self._ratio(self.tn, self.tn + self.fn)

    def metrics(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "recall_frozen": self.recall_frozen,
            "recall_thawed": self.recall_thawed,
            "precision_frozen": self.precision_frozen,
            "precision_thawed": self.precision_thawed,
        }

    def percentages(self) -> "ConfusionMatrix":
        t = self.total
        return ConfusionMatrix(100 * self.tp / t, 100 * self.tn / t, 100 * self.fp / t, 100 * self.fn / t)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def from_labels(cls, predicted: np.ndarray, reference: np.ndarray) -> "ConfusionMatrix":
        p = np.asarray(predicted, dtype=bool)
        r = np.asarray(reference, dtype=bool)
        return cls(int(np.sum(p & r)), int(np.sum(~p & ~r)), int(np.sum(p & ~r)), int(np.sum(~p & r)))


@dataclass
class Coverage:
    aligned_days: int = 0
    predicted_only_days: int = 0
    reference_only_days: int = 0
    pixels_without_reference: list[str] = field(default_factory=list)
    pixels_without_prediction: list[str] = field(default_factory=list)


def _date_range(data: BinarySet) -> str:
    dates = [d for d, _ in data.values() if len(d)]
    if not dates:
        return "no dates"
    return f"{min(d.min() for d in dates)}..{max(d.max() for d in dates)}"


def align(predicted: BinarySet, reference: BinarySet) -> tuple[dict[str, tuple[np.ndarray, np.ndarray]], Coverage]:
    """Per-pixel (predicted, reference) arrays on the dates both sides cover."""
    cov = Coverage()
    pairs = {}
    for pid in sorted(set(predicted) | set(reference)):
        if pid not in reference:
            cov.pixels_without_reference.append(pid)
            cov.predicted_only_days += len(predicted[pid][0])
            continue
        if pid not in predicted:
            cov.pixels_without_prediction.append(pid)
            cov.reference_only_days += len(reference[pid][0])
            continue
        pd, pv = predicted[pid]
        rd, rv = reference[pid]
        common, pi, ri = np.intersect1d(pd, rd, assume_unique=True, return_indices=True)
        cov.aligned_days += len(common)
        cov.predicted_only_days += len(pd) - len(common)
        cov.reference_only_days += len(rd) - len(common)
        if len(common):
            pairs[pid] = (np.asarray(pv, dtype=bool)[pi], np.asarray(rv, dtype=bool)[ri])
    return pairs, cov


def score(predicted: BinarySet, reference: BinarySet) -> tuple[ConfusionMatrix, Coverage]:
    """Pooled confusion matrix over every date-aligned pixel-day."""
    pairs, cov = align(predicted, reference)
    if cov.aligned_days == 0:
        raise ContractError(
            f"no overlapping pixel-days: predicted covers {_date_range(predicted)}, "
            f"reference covers {_date_range(reference)}")
    cm = ConfusionMatrix(0, 0, 0, 0)
    for p, r in pairs.values():
        cm = cm + ConfusionMatrix.from_labels(p, r)
    return cm, cov


def binarize(p_frozen: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Frozen where p(F) is strictly above ``threshold``; ties go to thawed."""
    if not 0.0 < threshold < 1.0:
        raise ContractError(f"threshold must lie in (0, 1), got {threshold}")
    return np.asarray(p_frozen, dtype=np.float64) > threshold


# ---------------------------------------------------------------- stratified


@dataclass
class StratumScore:
    matrix: ConfusionMatrix
    n_pixels: int
    pixel_accuracy: dict[str, float]  # median, q25, q75, p05, p95

    @property
    def n(self) -> int:
        return int(self.matrix.total)


def _spread(values: list[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64)
    q = np.percentile(v, [5, 25, 50, 75, 95])
    return {"p05": q[0], "q25": q[1], "median": q[2], "q75": q[3], "p95": q[4]}


def stratified_report(predicted: BinarySet, reference: BinarySet,
                      strata: dict[str, str]) -> dict[str, StratumScore]:
    """Scores per stratum label plus an ``ALL`` entry.

    ``strata`` maps pixel_id to a stratum label; pixels without one are
    pooled only into ``ALL``.
    """
    pairs, cov = align(predicted, reference)
    if cov.aligned_days == 0:
        raise ContractError(
            f"no overlapping pixel-days: predicted covers {_date_range(predicted)}, "
            f"reference covers {_date_range(reference)}")
    groups: dict[str, list[str]] = {"ALL": sorted(pairs)}
    for pid in sorted(pairs):
        if pid in strata:
            groups.setdefault(strata[pid], []).append(pid)
    out = {}
    for name in ["ALL"] + sorted(k for k in groups if k != "ALL"):
        cm = ConfusionMatrix(0, 0, 0, 0)
        accs = []
        for pid in groups[name]:
            pix = ConfusionMatrix.from_labels(*pairs[pid])
            cm = cm + pix
            accs.append(pix.accuracy)
        out[name] = StratumScore(cm, len(groups[name]), _spread(accs))
    return out


# ------------------------------------------------------------ frozen fraction


def frozen_fraction(series: BinarySet) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of pixels classified frozen on each date any pixel covers."""
    if not series:
        raise ContractError("no series to aggregate")
    all_dates = np.unique(np.concatenate([d for d, _ in series.values()]))
    frozen = np.zeros(len(all_dates))
    count = np.zeros(len(all_dates))
    for pid in sorted(series):
        d, v = series[pid]
        idx = np.searchsorted(all_dates, d)
        np.add.at(frozen, idx, np.asarray(v, dtype=bool))
        np.add.at(count, idx, 1)
    return all_dates, frozen / count


def moving_average(values: np.ndarray, window: int = SMOOTH_DAYS) -> np.ndarray:
    """Centred moving average whose window shrinks at the ends."""
    v = np.asarray(values, dtype=np.float64)
    half = window // 2
    c = np.concatenate([[0.0], np.cumsum(v)])
    i = np.arange(len(v))
    lo = np.maximum(i - half, 0)
    hi = np.minimum(i + half + 1, len(v))
    return (c[hi] - c[lo]) / (hi - lo)


@dataclass(frozen=True)
class Onsets:
    year: int
    thaw: np.datetime64 | None
    freeze: np.datetime64 | None


def _first_sustained(below: np.ndarray, start: int, persistence: int, want_below: bool) -> int | None:
    flags = below if want_below else ~below
    run = 0
    for i in range(start, len(flags)):
        run = run + 1 if flags[i] else 0
        if run >= persistence:
            onset = i - persistence + 1
            # an onset is a crossing, not the initial state
            if onset == 0:
                return None
            return onset
    return None


def onset_dates(dates: np.ndarray, fraction: np.ndarray, level: float = 0.5,
                persistence: int = ONSET_PERSISTENCE) -> list[Onsets]:
    """Thaw and freeze onsets per calendar year.

    Thaw onset is the first day the frozen fraction drops below ``level`` and
    stays there for ``persistence`` days; freeze onset is the first later day
    it climbs back to ``level`` or above with the same persistence.
    """
    dates = np.asarray(dates, dtype="datetime64[D]")
    fraction = np.asarray(fraction, dtype=np.float64)
    years = dates.astype("datetime64[Y]").astype(int) + 1970
    out = []
    for year in np.unique(years):
        sel = np.flatnonzero(years == year)
        below = fraction[sel] < level
        thaw_i = _first_sustained(below, 0, persistence, True)
        if thaw_i is not None and below[0]:
            thaw_i = None  # year starts thawed: no spring crossing
        freeze_start = thaw_i if thaw_i is not None else 0
        freeze_i = None
        if thaw_i is not None or below[0]:
            freeze_i = _first_sustained(below, freeze_start, persistence, False)
        out.append(Onsets(int(year),
                          None if thaw_i is None else dates[sel[thaw_i]],
                          None if freeze_i is None else dates[sel[freeze_i]]))
    return out
