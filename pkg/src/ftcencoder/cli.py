"""Command-line pipeline: simulate, train, retrieve, baseline, evaluate, report."""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .datapipe import (
    GenConfig,
    PixelSeries,
    StratumKey,
    TempSeries,
    generate_synthetic,
    interpolate_daily,
    label_segments,
    melt_heavy,
    stratify,
)
from .datapipe import io
from .model import (
    DEFAULT_WINDOW,
    FTCModel,
    NumericalError,
    TrainConfig,
    load_checkpoint,
    retrieve,
    save_checkpoint,
    train,
)
from .ndcore import ContractError
from .npr import compute_npr, estimate_references, seasonal_threshold

log = logging.getLogger("ftcencoder")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
CHECKPOINT_SUFFIX = ".ftc"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings for one command; flags beat the config file, which beats these defaults."""

    data: str = "data"
    out: str = "out"
    models: str = ""  # defaults to <out>/models
    tb: str = ""
    temps: str = ""
    ancillary: str = ""
    truth: str = ""
    seed: int = 42
    threshold: float = 0.5
    window: int = DEFAULT_WINDOW
    train_years: int = 3
    exclude_pixels: str = ""  # comma-separated, e.g. pixels hosting validation stations
    strata: str = ""  # comma-separated subset; empty means every trainable stratum
    smooth: bool = True
    # simulate
    n_pixels: int = 200
    years: int = 5
    start_year: int = 2015
    scenario: str = "default"  # default | melt_heavy
    melt_rate: float = -1.0  # negative keeps the scenario's value
    spring_melt_days: int = -1
    # train
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    loss_clamp: float = 1e-6
    normalization: str = "stratum"
    max_chunk: int = 32

    def __post_init__(self):
        self.models = self.models or str(Path(self.out) / "models")
        for name in ("tb", "temps", "ancillary", "truth"):
            if not getattr(self, name):
                setattr(self, name, str(Path(self.data) / f"{name}.csv"))

    @property
    def excluded(self) -> set[str]:
        return {p.strip() for p in self.exclude_pixels.split(",") if p.strip()}

    @property
    def stratum_filter(self) -> set[str]:
        return {s.strip() for s in self.strata.split(",") if s.strip()}

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs, batch_size=self.batch_size,
                           rng_seed=self.seed, loss_clamp=self.loss_clamp, normalization=self.normalization,
                           max_chunk=self.max_chunk)

    def gen_config(self) -> GenConfig:
        cfg = GenConfig(rng_seed=self.seed, start_year=self.start_year)
        if self.scenario == "melt_heavy":
            cfg = melt_heavy(cfg)
        elif self.scenario != "default":
            raise UsageError(f"unknown scenario {self.scenario!r}")
        if self.melt_rate >= 0:
            cfg = replace(cfg, melt_rate=self.melt_rate)
        if self.spring_melt_days >= 0:
            cfg = replace(cfg, spring_melt_days=self.spring_melt_days)
        return cfg

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


def _coerce(name: str, kind: type, text: str):
    try:
        if kind is bool:
            return configparser.ConfigParser.BOOLEAN_STATES[text.strip().lower()]
        return kind(text)
    except (KeyError, ValueError):
        raise UsageError(f"config key {name}: cannot read {text!r} as {kind.__name__}") from None


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge an INI file (any section, flat keys) with flag overrides."""
    kinds = {f.name: type(f.default) for f in fields(RunConfig)}
    values = {}
    if path:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        for section in parser.sections():
            for key, text in parser.items(section):
                if key not in kinds:
                    raise UsageError(f"unknown config key [{section}] {key}")
                values[key] = _coerce(key, kinds[key], text)
    values.update({k: v for k, v in overrides.items() if v is not None and k in kinds})
    return RunConfig(**values)


# ------------------------------------------------------------------ helpers


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require(*paths: str) -> None:
    missing = [p for p in paths if not Path(p).is_file()]
    if missing:
        raise UsageError(f"missing input file(s): {', '.join(missing)}")


def write_manifest(command: str, cfg: RunConfig, inputs: list[str], artifacts: list[Path],
                   out_dir: Path, notes: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "config": asdict(cfg),
        "inputs": {str(p): _digest(Path(p)) for p in sorted(inputs)},
        "artifacts": {Path(p).name: _digest(Path(p)) for p in sorted(artifacts, key=lambda p: Path(p).name)},
    }
    if notes:
        manifest["notes"] = notes
    path = out_dir / f"manifest_{command}.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


@dataclass
class Dataset:
    series: list[PixelSeries]  # daily, possibly several pieces per pixel
    temps: dict[str, TempSeries]
    strata: dict[str, StratumKey]
    split: np.datetime64
    excluded: dict[str, str] = field(default_factory=dict)


def load_dataset(cfg: RunConfig, need_temps: bool = True) -> Dataset:
    paths = [cfg.tb, cfg.ancillary] + ([cfg.temps] if need_temps else [])
    _require(*paths)
    raw = io.read_tb(cfg.tb)
    strat = stratify(io.read_ancillary(cfg.ancillary))
    stratum_of = strat.stratum_of()
    excluded = dict(strat.excluded)
    for pid in sorted(cfg.excluded):
        excluded[pid] = "excluded by configuration"
    series = []
    for pid, (dates, v, h) in raw.items():
        if pid in excluded:
            continue
        if pid not in stratum_of:
            raise ContractError(f"{cfg.ancillary}: pixel {pid} has no ancillary record")
        series += interpolate_daily(pid, dates, v, h, stratum=stratum_of[pid])
    temps = io.read_temps(cfg.temps) if need_temps else {}
    if not series:
        raise ContractError("no usable pixels after exclusions")
    first_year = min(s.dates[0] for s in series).astype("datetime64[Y]").astype(int) + 1970
    split = np.datetime64(f"{first_year + cfg.train_years}-01-01", "D")
    return Dataset(series, temps, stratum_of, split, excluded)


def _aligned_temps(ds: Dataset, s: PixelSeries, path: str) -> TempSeries:
    t = ds.temps.get(s.pixel_id)
    if t is None:
        raise ContractError(f"{path}: no temperatures for pixel {s.pixel_id}")
    idx = np.searchsorted(t.dates, s.dates)
    if np.any(idx >= len(t.dates)) or np.any(t.dates[np.minimum(idx, len(t.dates) - 1)] != s.dates):
        raise ContractError(f"{path}: temperatures for pixel {s.pixel_id} do not cover its TB dates")
    keep = np.zeros(len(t.dates), dtype=bool)
    keep[idx] = True
    return t.select(keep)


def training_segments(cfg: RunConfig, ds: Dataset) -> dict[StratumKey, list]:
    by_stratum: dict[StratumKey, list] = {}
    for s in ds.series:
        if not s.stratum.trainable:
            continue
        part = s.select(s.dates < ds.split)
        if len(part.dates) < 7:
            continue
        segs = label_segments(part, _aligned_temps(ds, s, cfg.temps).select(s.dates < ds.split))
        by_stratum.setdefault(s.stratum, []).extend(segs)
    wanted = cfg.stratum_filter
    if wanted:
        unknown = wanted - {str(k) for k in by_stratum}
        if unknown:
            raise ContractError(f"requested strata {sorted(unknown)} have no training data; "
                                f"available: {sorted(map(str, by_stratum))}")
        by_stratum = {k: v for k, v in by_stratum.items() if str(k) in wanted}
    return dict(sorted(by_stratum.items()))


def holdout_series(ds: Dataset) -> list[PixelSeries]:
    out = []
    for s in ds.series:
        part = s.select(s.dates >= ds.split)
        if len(part.dates) >= 7:
            out.append(part)
    return sorted(out, key=lambda s: (s.pixel_id, s.dates[0]))


def _merge(pieces: dict[str, list[tuple[np.ndarray, np.ndarray]]]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {pid: (np.concatenate([d for d, _ in parts]), np.concatenate([v for _, v in parts]))
            for pid, parts in sorted(pieces.items())}


# ----------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig) -> int:
    scene = generate_synthetic(cfg.gen_config(), n_pixels=cfg.n_pixels, years=cfg.years)
    out = Path(cfg.data)
    artifacts = [
        io.write_tb(out / "tb.csv", scene.tb),
        io.write_temps(out / "temps.csv", scene.temps),
        io.write_ancillary(out / "ancillary.csv", scene.ancillary),
        io.write_truth(out / "truth.csv", {pid: (scene.dates, f) for pid, f in scene.truth.items()}),
    ]
    write_manifest("simulate", cfg, [], artifacts, out)
    print(f"simulated {cfg.n_pixels} pixels x {cfg.years} years into {out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    ds = load_dataset(cfg)
    tcfg = cfg.train_config()
    models = Path(cfg.models)
    models.mkdir(parents=True, exist_ok=True)
    artifacts, skipped = [], {}
    for key, segs in training_segments(cfg, ds).items():
        labels = {s.y for s in segs}
        if labels != {0, 1}:
            skipped[str(key)] = f"needs frozen and thawed segments, has y={sorted(labels)}"
            log.warning("skipping %s: %s", key, skipped[str(key)])
            continue
        model, history = train(segs, tcfg, key)
        artifacts.append(save_checkpoint(model, models / f"{key}{CHECKPOINT_SUFFIX}"))
        artifacts.append(io.write_csv(
            models / f"{key}_log.csv", ("epoch", "objective", "mean_L_frozen", "mean_L_thawed"),
            ((e["epoch"], f"{e['objective']:.10g}", f"{e['mean_L_frozen']:.10g}", f"{e['mean_L_thawed']:.10g}")
             for e in history.epochs)))
        last = history.epochs[-1]
        print(f"{key}: {len(segs)} segments, objective {history.epochs[0]['objective']:.4f} -> "
              f"{last['objective']:.4f}")
    if not artifacts:
        raise ContractError(f"no stratum could be trained: {skipped}")
    write_manifest("train", cfg, [cfg.tb, cfg.temps, cfg.ancillary], artifacts, models,
                   {"skipped_strata": skipped, "excluded_pixels": ds.excluded})
    return EXIT_OK


def available_models(models: Path) -> dict[str, Path]:
    return {p.name[: -len(CHECKPOINT_SUFFIX)]: p for p in sorted(models.glob(f"*{CHECKPOINT_SUFFIX}"))}


def _model_for(key: StratumKey, cache: dict[str, FTCModel], models: Path) -> FTCModel:
    name = str(key)
    if name not in cache:
        found = available_models(models)
        if name not in found:
            raise ContractError(f"no checkpoint for stratum {name} in {models}; "
                                f"available strata: {', '.join(found) or 'none'}")
        cache[name] = load_checkpoint(found[name])
    return cache[name]


def cmd_retrieve(cfg: RunConfig) -> int:
    ds = load_dataset(cfg, need_temps=False)
    wanted = cfg.stratum_filter
    cache: dict[str, FTCModel] = {}
    pieces: dict[str, list] = {}
    for s in holdout_series(ds):
        if not s.stratum.trainable or (wanted and str(s.stratum) not in wanted):
            continue
        r = retrieve(_model_for(s.stratum, cache, Path(cfg.models)), s, cfg.window)
        pieces.setdefault(s.pixel_id, []).append((r.dates, r.p_frozen))
    out = Path(cfg.out)
    path = io.write_retrievals(out / "retrievals.csv", _merge(pieces))
    inputs = [cfg.tb, cfg.ancillary] + [str(p) for p in available_models(Path(cfg.models)).values()]
    write_manifest("retrieve", cfg, inputs, [path], out)
    print(f"retrieved {len(pieces)} pixels into {path}")
    return EXIT_OK


def cmd_baseline(cfg: RunConfig) -> int:
    ds = load_dataset(cfg)
    refs = {key: estimate_references(segs, str(key)) for key, segs in training_segments(cfg, ds).items()}
    pieces: dict[str, list] = {}
    for s in holdout_series(ds):
        if s.stratum not in refs:
            continue
        pieces.setdefault(s.pixel_id, []).append((s.dates, ~seasonal_threshold(s, refs[s.stratum])))
    out = Path(cfg.out)
    artifacts = [
        io.write_states(out / "baseline.csv", _merge(pieces)),
        io.write_csv(out / "npr_references.csv", ("stratum", "npr_frozen", "npr_thawed", "delta_npr"),
                     ((str(k), f"{r.npr_frozen:.8f}", f"{r.npr_thawed:.8f}", f"{r.delta_npr:.8f}")
                      for k, r in refs.items())),
    ]
    write_manifest("baseline", cfg, [cfg.tb, cfg.temps, cfg.ancillary], artifacts, out)
    print(f"baseline states for {len(pieces)} pixels into {artifacts[0]}")
    return EXIT_OK


def _predictions(cfg: RunConfig) -> dict[str, dict]:
    out = Path(cfg.out)
    found = {}
    if (out / "retrievals.csv").is_file():
        found["ftc"] = {pid: (d, ev.binarize(p, cfg.threshold))
                        for pid, (d, p) in io.read_retrievals(out / "retrievals.csv").items()}
    if (out / "baseline.csv").is_file():
        found["baseline"] = io.read_states(out / "baseline.csv")
    if not found:
        raise UsageError(f"nothing to evaluate: run retrieve and/or baseline into {out} first")
    return found


def _pct(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{100 * x:.1f}"


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg.truth, cfg.ancillary)
    truth = io.read_truth(cfg.truth)
    strata = {pid: str(k) for pid, k in stratify(io.read_ancillary(cfg.ancillary)).stratum_of().items()}
    rows, text = [], []
    for method, pred in _predictions(cfg).items():
        report = ev.stratified_report(pred, truth, strata)
        _, cov = ev.align(pred, truth)
        text.append(f"== {method} accuracy (threshold {cfg.threshold}) ==")
        text.append(f"aligned days {cov.aligned_days}, predicted-only days {cov.predicted_only_days}, "
                    f"reference-only days {cov.reference_only_days}")
        text.append(f"{'stratum':<14}{'n':>9}{'acc%':>8}{'recF%':>8}{'recT%':>8}{'preF%':>8}{'preT%':>8}"
                    f"{'medPix%':>9}{'IQR%':>13}")
        for name, sc in report.items():
            m = sc.matrix.metrics()
            pa = sc.pixel_accuracy
            text.append(f"{name:<14}{sc.n:>9}{_pct(m['accuracy']):>8}{_pct(m['recall_frozen']):>8}"
                        f"{_pct(m['recall_thawed']):>8}{_pct(m['precision_frozen']):>8}"
                        f"{_pct(m['precision_thawed']):>8}{_pct(pa['median']):>9}"
                        f"{_pct(pa['q25']) + '-' + _pct(pa['q75']):>13}")
            for metric, value in m.items():
                rows.append((name, f"{method}.{metric}_pct", _pct(value), sc.n))
            cells = sc.matrix.percentages()
            for cell in ("tp", "tn", "fp", "fn"):
                rows.append((name, f"{method}.{cell}", int(getattr(sc.matrix, cell)), sc.n))
                rows.append((name, f"{method}.{cell}_pct", _pct(getattr(cells, cell) / 100), sc.n))
            for stat, value in pa.items():
                rows.append((name, f"{method}.pixel_accuracy_{stat}_pct", _pct(value), sc.n_pixels))
        text.append("")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / "report.txt"
    txt.write_text("\n".join(text), encoding="utf-8")
    csv_path = io.write_csv(out / "report.csv", ("stratum", "metric", "value", "n"), rows)
    inputs = [cfg.truth, cfg.ancillary] + [str(out / f) for f in ("retrievals.csv", "baseline.csv")
                                           if (out / f).is_file()]
    write_manifest("evaluate", cfg, inputs, [txt, csv_path], out)
    print("\n".join(text))
    return EXIT_OK


def _onset_text(d) -> str:
    return "" if d is None else str(d)


def cmd_report(cfg: RunConfig) -> int:
    _require(cfg.truth, cfg.tb, cfg.ancillary)
    preds = _predictions(cfg)
    truth = io.read_truth(cfg.truth)
    out = Path(cfg.out)
    # restrict truth to the scored pixels and dates so fractions share a domain
    scored = next(iter(preds.values()))
    aligned_truth = {}
    for pid, (d, _) in scored.items():
        if pid in truth:
            td, tv = truth[pid]
            common, _, ti = np.intersect1d(d, td, return_indices=True)
            aligned_truth[pid] = (common, tv[ti])
    series = {"ftc": preds.get("ftc"), "baseline": preds.get("baseline"), "truth": aligned_truth}
    fractions = {}
    for name, data in series.items():
        if data:
            dates, frac = ev.frozen_fraction(data)
            fractions[name] = (dates, ev.moving_average(frac) if cfg.smooth else frac)
    all_dates = np.unique(np.concatenate([d for d, _ in fractions.values()]))

    def column(name):
        if name not in fractions:
            return [""] * len(all_dates)
        d, f = fractions[name]
        lookup = dict(zip(d.tolist(), f))
        return [f"{lookup[x]:.4f}" if x in lookup else "" for x in all_dates.tolist()]

    cols = [column(n) for n in ("ftc", "baseline", "truth")]
    artifacts = [io.write_csv(out / "frozen_fraction.csv", ("date", "fraction_ftc", "fraction_baseline",
                                                             "fraction_truth"),
                              ((str(d), *vals) for d, *vals in zip(all_dates, *cols)))]
    onset_rows = []
    for name, (d, f) in fractions.items():
        for o in ev.onset_dates(d, f):
            onset_rows.append((o.year, name, _onset_text(o.thaw), _onset_text(o.freeze)))
    artifacts.append(io.write_csv(out / "onsets.csv", ("year", "series", "thaw_onset", "freeze_onset"),
                                  sorted(onset_rows)))

    # per-pixel panels: TB, NPR, p(F) and the three state labels on every scored day
    raw = io.read_tb(cfg.tb)
    retr = io.read_retrievals(out / "retrievals.csv") if (out / "retrievals.csv").is_file() else {}
    base = preds.get("baseline", {})

    def lookup(data, pid):
        if pid not in data:
            return {}
        d, v = data[pid]
        return dict(zip(d.tolist(), v.tolist()))

    def panel_rows():
        for pid in sorted(scored):
            if pid not in raw:
                continue
            for s in interpolate_daily(pid, *raw[pid]):
                p, b, t = lookup(retr, pid), lookup(base, pid), lookup(truth, pid)
                npr = compute_npr(s.tb_v, s.tb_h)
                for i, d in enumerate(s.dates.tolist()):
                    if d not in p and d not in b:
                        continue
                    state = ("" if d not in p else ("frozen" if p[d] > cfg.threshold else "thawed"))
                    yield (pid, str(np.datetime64(d, "D")), f"{s.tb_v[i]:.2f}", f"{s.tb_h[i]:.2f}",
                           f"{npr[i]:.6f}", "" if d not in p else f"{p[d]:.6f}", state,
                           "" if d not in b else ("frozen" if b[d] else "thawed"),
                           "" if d not in t else ("frozen" if t[d] else "thawed"))

    artifacts.append(io.write_csv(out / "panels.csv", ("pixel_id", "date", "tb_v_k", "tb_h_k", "npr", "p_frozen",
                                                      "ftc_state", "baseline_state", "truth_state"),
                                  panel_rows()))
    inputs = [cfg.truth, cfg.tb, cfg.ancillary] + [str(out / f) for f in ("retrievals.csv", "baseline.csv")
                                                   if (out / f).is_file()]
    write_manifest("report", cfg, inputs, artifacts, out)
    for row in sorted(onset_rows):
        print(f"{row[0]} {row[1]:<8} thaw onset {row[2] or '-':<10}  freeze onset {row[3] or '-'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "retrieve": cmd_retrieve,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}

COMMAND_HELP = {
    "simulate": "write a synthetic scene into the data directory",
    "train": "fit one model per stratum on the training years",
    "retrieve": "daily p(F) for the held-out years",
    "baseline": "seasonal NPR threshold classification",
    "evaluate": "score retrievals and baseline against truth",
    "report": "frozen-fraction series and transition onsets",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file; keys may sit in any section")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="directory for results (default: out)")
    common.add_argument("--data", help="directory holding tb/temps/ancillary/truth CSVs (default: data)")
    common.add_argument("--models", help="checkpoint directory (default: <out>/models)")
    common.add_argument("--tb")
    common.add_argument("--temps")
    common.add_argument("--ancillary")
    common.add_argument("--truth")
    common.add_argument("--threshold", type=float, help="p(F) above this is frozen (default 0.5)")
    common.add_argument("--window", type=int, help="retrieval window in days, odd (default 21)")
    common.add_argument("--train-years", dest="train_years", type=int)
    common.add_argument("--exclude-pixels", dest="exclude_pixels", help="comma-separated pixel ids")
    common.add_argument("--strata", help="comma-separated stratum keys, e.g. WS_wf00-05")
    common.add_argument("--epochs", type=int)
    common.add_argument("--n-pixels", dest="n_pixels", type=int)
    common.add_argument("--years", type=int)
    common.add_argument("--scenario", choices=("default", "melt_heavy"))
    common.add_argument("--no-smooth", dest="smooth", action="store_const", const=False)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="ftcencoder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name])
    return parser


def _fail(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": " ".join(str(message).split())}),
          file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config, vars(args))
        if not 0.0 < cfg.threshold < 1.0:
            raise UsageError(f"--threshold must lie in (0, 1), got {cfg.threshold}")
        if cfg.window < 7 or cfg.window % 2 == 0:
            raise UsageError(f"--window must be odd and >= 7, got {cfg.window}")
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except NumericalError as exc:
        return _fail("numerical", EXIT_NUMERIC, exc)
    except (ContractError, OSError) as exc:
        return _fail("data", EXIT_DATA, exc)
    except FloatingPointError as exc:
        return _fail("numerical", EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
