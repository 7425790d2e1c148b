"""CSV readers and writers for the pipeline's text file formats."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..ndcore import ContractError
from .series import LAND_COVERS, PixelSeries, TempSeries

TB_HEADER = ("pixel_id", "date", "tb_v_k", "tb_h_k")
TEMP_HEADER = ("pixel_id", "date", "soil_k", "air_k")
ANCILLARY_HEADER = ("pixel_id", "land_cover", "water_fraction")
TRUTH_HEADER = ("pixel_id", "date", "frozen")
STATE_HEADER = ("pixel_id", "date", "state")
RETRIEVAL_HEADER = ("pixel_id", "date", "p_frozen")

TB_RANGE = (100.0, 330.0)
TEMP_RANGE = (180.0, 330.0)


class DataError(ContractError):
    """Malformed input file; the message carries file and line."""

    def __init__(self, path: Path | str, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def _rows(path: Path | str, header: tuple[str, ...]) -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise DataError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def _date(path, line, text) -> np.datetime64:
    try:
        return np.datetime64(text, "D")
    except ValueError:
        raise DataError(path, line, f"bad ISO date {text!r}") from None


def _kelvin(path, line, name, text, bounds) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(path, line, f"{name} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(path, line, f"{name} is not finite: {text!r}")
    lo, hi = bounds
    if not lo < value < hi:
        raise DataError(path, line, f"{name}={value} outside ({lo:g}, {hi:g}) K")
    return value


def _grouped(path, header, parse) -> dict[str, tuple[np.ndarray, list[tuple]]]:
    """pixel_id -> (sorted dates, values per date), rejecting duplicate dates."""
    raw = defaultdict(list)
    for line, row in _rows(path, header):
        raw[row[0]].append((_date(path, line, row[1]), line, parse(line, row[2:])))
    out = {}
    for pid in sorted(raw):
        items = sorted(raw[pid], key=lambda r: r[0])
        for (d0, _, _), (d1, line, _) in zip(items, items[1:]):
            if d0 == d1:
                raise DataError(path, line, f"duplicate date {d1} for pixel {pid}")
        out[pid] = (np.array([r[0] for r in items], dtype="datetime64[D]"), [r[2] for r in items])
    return out


def read_tb(path) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Raw observations: pixel_id -> (dates, tb_v, tb_h)."""
    def parse(line, f):
        return (_kelvin(path, line, "tb_v_k", f[0], TB_RANGE), _kelvin(path, line, "tb_h_k", f[1], TB_RANGE))
    out = {}
    for pid, (dates, vals) in _grouped(path, TB_HEADER, parse).items():
        v = np.array(vals, dtype=np.float64).reshape(-1, 2)
        out[pid] = (dates, v[:, 0], v[:, 1])
    return out


def read_temps(path) -> dict[str, TempSeries]:
    def parse(line, f):
        return (_kelvin(path, line, "soil_k", f[0], TEMP_RANGE), _kelvin(path, line, "air_k", f[1], TEMP_RANGE))
    out = {}
    for pid, (dates, vals) in _grouped(path, TEMP_HEADER, parse).items():
        v = np.array(vals, dtype=np.float64).reshape(-1, 2)
        out[pid] = TempSeries(pid, dates, v[:, 0], v[:, 1])
    return out


def read_ancillary(path) -> dict[str, tuple[str, float]]:
    out = {}
    for line, (pid, cover, wf) in _rows(path, ANCILLARY_HEADER):
        if cover not in LAND_COVERS:
            raise DataError(path, line, f"unknown land cover {cover!r}")
        try:
            frac = float(wf)
        except ValueError:
            raise DataError(path, line, f"water_fraction is not a number: {wf!r}") from None
        if not 0.0 <= frac <= 1.0:
            raise DataError(path, line, f"water_fraction={wf} outside [0, 1]")
        if pid in out:
            raise DataError(path, line, f"duplicate pixel {pid}")
        out[pid] = (cover, frac)
    return dict(sorted(out.items()))


def _binary_flag(path, line, text, true: str, false: str) -> bool:
    if text == true:
        return True
    if text == false:
        return False
    raise DataError(path, line, f"expected {true} or {false}, got {text!r}")


def read_truth(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """pixel_id -> (dates, frozen bool)."""
    grouped = _grouped(path, TRUTH_HEADER, lambda line, f: _binary_flag(path, line, f[0], "1", "0"))
    return {pid: (d, np.array(v, dtype=bool)) for pid, (d, v) in grouped.items()}


def read_states(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Baseline output back into pixel_id -> (dates, frozen bool)."""
    grouped = _grouped(path, STATE_HEADER, lambda line, f: _binary_flag(path, line, f[0], "frozen", "thawed"))
    return {pid: (d, np.array(v, dtype=bool)) for pid, (d, v) in grouped.items()}


def read_retrievals(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """pixel_id -> (dates, p_frozen)."""
    def parse(line, f):
        try:
            p = float(f[0])
        except ValueError:
            raise DataError(path, line, f"p_frozen is not a number: {f[0]!r}") from None
        if not 0.0 <= p <= 1.0:
            raise DataError(path, line, f"p_frozen={f[0]} outside [0, 1]")
        return p
    return {pid: (d, np.array(v)) for pid, (d, v) in _grouped(path, RETRIEVAL_HEADER, parse).items()}


# ------------------------------------------------------------------ writers


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _kelvin_text(x: float) -> str:
    return f"{x:.2f}"


def write_tb(path, series: Iterable[PixelSeries], observed_only: bool = True) -> Path:
    def rows():
        for s in sorted(series, key=lambda s: s.pixel_id):
            keep = s.observed if observed_only else np.ones(len(s.dates), dtype=bool)
            for d, v, h in zip(s.dates[keep], s.tb_v[keep], s.tb_h[keep]):
                yield s.pixel_id, str(d), _kelvin_text(v), _kelvin_text(h)
    return write_csv(path, TB_HEADER, rows())


def write_temps(path, temps: Iterable[TempSeries]) -> Path:
    def rows():
        for t in sorted(temps, key=lambda t: t.pixel_id):
            for d, s, a in zip(t.dates, t.soil_k, t.air_k):
                yield t.pixel_id, str(d), _kelvin_text(s), _kelvin_text(a)
    return write_csv(path, TEMP_HEADER, rows())


def write_ancillary(path, ancillary: dict[str, tuple[str, float]]) -> Path:
    return write_csv(path, ANCILLARY_HEADER,
                     ((pid, cover, f"{wf:.3f}") for pid, (cover, wf) in sorted(ancillary.items())))


def write_truth(path, truth: dict[str, tuple[np.ndarray, np.ndarray]]) -> Path:
    def rows():
        for pid, (dates, frozen) in sorted(truth.items()):
            for d, f in zip(dates, frozen):
                yield pid, str(d), int(bool(f))
    return write_csv(path, TRUTH_HEADER, rows())


def write_states(path, states: dict[str, tuple[np.ndarray, np.ndarray]]) -> Path:
    def rows():
        for pid, (dates, frozen) in sorted(states.items()):
            for d, f in zip(dates, frozen):
                yield pid, str(d), "frozen" if f else "thawed"
    return write_csv(path, STATE_HEADER, rows())


def write_retrievals(path, retrievals: dict[str, tuple[np.ndarray, np.ndarray]]) -> Path:
    def rows():
        for pid, (dates, p) in sorted(retrievals.items()):
            for d, v in zip(dates, p):
                yield pid, str(d), f"{v:.8f}"
    return write_csv(path, RETRIEVAL_HEADER, rows())
