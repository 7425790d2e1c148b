"""Synthetic dual-polarization TB / temperature scenes with known freeze-thaw truth.

Each pixel gets a yearly thaw and freeze date.  Soil temperature is built
around 273.15 K so the truth (soil frozen) is exact, air temperature leads
the soil by a few days (zero-curtain analogue), and TBs switch between a warm
winter regime and a depressed summer regime.  Sub-grid water deepens the
summer depression and delays both TB transitions (lake ice); winter melt
transients wet the snow for a few days, lowering TBs and raising the
polarization difference while the ground stays frozen.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from ..ndcore import ContractError
from .series import WATER_BIN_EDGES, PixelSeries, StratumKey, TempSeries, interpolate_daily

FREEZE_POINT_K = 273.15
# melt-day air stays under the frozen labeling threshold
WARM_SPELL_CEILING_K = 270.5


@dataclass(frozen=True)
class StratumProfile:
    land_cover: str = "WS"
    water_bin: int = 0
    tb_v_winter: float = 255.0
    thaw_depression: float = 25.0  # V drop right after thaw, K
    summer_residual: float = 10.0  # V deficit the summer recovers to, K
    recovery_days: float = 25.0
    pol_frozen: float = 4.0  # V - H, K
    pol_thawed: float = 12.0
    winter_noise: float = 2.0
    summer_noise: float = 1.5
    lake_lag_days: int = 0

    @property
    def key(self) -> StratumKey:
        return StratumKey(self.land_cover, self.water_bin)


DEFAULT_STRATA = (
    StratumProfile("WS", 0, 255.0, 25.0, 3.0, 15.0, 4.0, 12.0, 2.5, 1.5, 0),
    StratumProfile("G", 1, 248.0, 35.0, 25.0, 25.0, 5.0, 13.0, 2.0, 1.5, 1),
    StratumProfile("WS", 2, 240.0, 55.0, 50.0, 20.0, 6.0, 14.0, 2.0, 1.5, 3),
    StratumProfile("OS", 3, 232.0, 65.0, 60.0, 20.0, 7.0, 15.0, 2.0, 1.5, 4),
)


@dataclass(frozen=True)
class GenConfig:
    rng_seed: int = 42
    strata: tuple[StratumProfile, ...] = DEFAULT_STRATA
    start_year: int = 2015
    thaw_doy: float = 130.0
    freeze_doy: float = 285.0
    pixel_jitter_days: float = 4.0
    year_jitter_days: float = 6.0
    air_lead_days: float = 5.0
    soil_amp_summer: float = 12.0
    soil_amp_winter: float = 12.0
    air_amp_summer: float = 15.0
    air_amp_winter: float = 25.0
    air_noise: float = 2.5
    melt_rate: float = 2.0  # events per winter
    melt_min_days: int = 2
    melt_max_days: int = 4
    melt_depth: float = 15.0  # V drop, K
    melt_pol: float = 8.0  # extra V - H during a melt event, K
    melt_air_k: float = 269.0  # air temperature at the peak of a warm spell
    obs_skip_prob: float = 0.4  # chance the next overpass is two days out
    # region-wide wet-snow spell ahead of the spring thaw; 0 disables it
    spring_melt_days: int = 0
    spring_melt_lead_days: float = 25.0

    def validate(self) -> None:
        if not self.strata:
            raise ContractError("GenConfig needs at least one stratum profile")
        for p in self.strata:
            if p.thaw_depression < 0 or p.summer_residual < 0:
                raise ContractError(f"{p.key}: depression depths must be >= 0")
            if p.summer_residual <= 0 and p.thaw_depression <= 0:
                raise ContractError(f"{p.key}: summer TB mean must be below winter TB mean")
            if not 0 <= p.water_bin < len(WATER_BIN_EDGES) - 1:
                raise ContractError(f"{p.key}: unknown water bin {p.water_bin}")
        if self.melt_min_days < 1 or self.melt_max_days < self.melt_min_days:
            raise ContractError("melt duration range is empty")
        if not self.freeze_doy > self.thaw_doy:
            raise ContractError("freeze_doy must follow thaw_doy")
        if self.spring_melt_days < 0 or self.spring_melt_lead_days < self.spring_melt_days:
            raise ContractError("spring melt spell must end before the nominal thaw")


def melt_heavy(cfg: GenConfig | None = None) -> GenConfig:
    """Winters riddled with wet-snow episodes."""
    cfg = cfg or GenConfig()
    return replace(cfg, melt_rate=14.0, melt_max_days=5, melt_depth=25.0, melt_pol=10.0)


# open shrubland: clear TB drop at thaw, polarization contrast that hardly changes
SHRUB_TUNDRA = StratumProfile("OS", 0, 255.0, 30.0, 20.0, 20.0, 4.0, 12.0, 2.0, 1.5, 0)


def degenerate_profile(base: StratumProfile | None = None) -> StratumProfile:
    """``base`` with its thawed V - H rescaled so thawed NPR matches frozen NPR."""
    base = base or SHRUB_TUNDRA
    v_w = base.tb_v_winter
    # mean summer V over a ~150 day summer; NPR = p / (2V - p) held equal across regimes
    v_s = v_w - base.summer_residual - (base.thaw_depression - base.summer_residual) * base.recovery_days / 150.0
    npr_f = base.pol_frozen / (2 * v_w - base.pol_frozen)
    pol_t = 2 * v_s * npr_f / (1 + npr_f)
    return replace(base, pol_thawed=pol_t)


@dataclass
class SyntheticScene:
    tb: list[PixelSeries]
    temps: list[TempSeries]
    truth: dict[str, np.ndarray]  # pixel_id -> bool frozen per day
    ancillary: dict[str, tuple[str, float]]
    dates: np.ndarray
    melt_days: dict[str, np.ndarray] = field(default_factory=dict)


def _ar1(rng: np.random.Generator, n: int, sigma: float, phi: float) -> np.ndarray:
    e = rng.normal(0.0, sigma * np.sqrt(1 - phi * phi), n)
    out = np.empty(n)
    acc = rng.normal(0.0, sigma)
    for i in range(n):
        acc = phi * acc + e[i]
        out[i] = acc
    return out


def _season_shape(t: np.ndarray, thaws: np.ndarray, freezes: np.ndarray) -> np.ndarray:
    """+sin hump over each thawed interval, -sin trough over each frozen one."""
    edges = np.sort(np.concatenate([thaws, freezes]))
    is_thaw = np.isin(edges, thaws)
    i = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 2)
    a, b = edges[i], edges[i + 1]
    phase = np.sin(np.pi * np.clip((t - a) / (b - a), 0.0, 1.0))
    return np.where(is_thaw[i], phase, -phase)


def _schedule(cfg: GenConfig, rng: np.random.Generator, year_starts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    offset = rng.normal(0.0, cfg.pixel_jitter_days)
    n = len(year_starts)
    thaw = year_starts + np.round(cfg.thaw_doy + offset + rng.normal(0.0, cfg.year_jitter_days, n))
    freeze = year_starts + np.round(cfg.freeze_doy + offset + rng.normal(0.0, cfg.year_jitter_days, n))
    return thaw, freeze


def _spring_spells(cfg: GenConfig, year_starts: np.ndarray) -> np.ndarray:
    """Start day of the shared pre-thaw wet-snow spell in each year."""
    if cfg.spring_melt_days == 0:
        return np.empty(0)
    rng = np.random.default_rng([cfg.rng_seed, 1])
    jitter = rng.normal(0.0, cfg.year_jitter_days / 2, len(year_starts))
    return year_starts + np.round(cfg.thaw_doy - cfg.spring_melt_lead_days + jitter)


def _simulate_pixel(cfg: GenConfig, prof: StratumProfile, rng: np.random.Generator, n_days: int,
                    year_starts: np.ndarray, spring_spells: np.ndarray):
    t = np.arange(n_days, dtype=np.float64)
    thaw, freeze = _schedule(cfg, rng, year_starts)
    thawed = np.zeros(n_days, dtype=bool)
    for a, b in zip(thaw, freeze):
        thawed[int(max(a, 0)): int(max(min(b, n_days), 0))] = True
    frozen = ~thawed

    shape = _season_shape(t, thaw, freeze)
    amp = np.where(shape > 0, cfg.soil_amp_summer, cfg.soil_amp_winter)
    soil = FREEZE_POINT_K + amp * shape + _ar1(rng, n_days, 0.8, 0.9)
    soil = np.where(frozen, np.minimum(soil, FREEZE_POINT_K - 0.05), np.maximum(soil, FREEZE_POINT_K + 0.05))

    air_shape = _season_shape(t + cfg.air_lead_days, thaw, freeze)
    air_amp = np.where(air_shape > 0, cfg.air_amp_summer, cfg.air_amp_winter)
    air = FREEZE_POINT_K + air_amp * air_shape + _ar1(rng, n_days, cfg.air_noise, 0.7)

    # melt transients inside frozen spells, clear of the transitions
    melt = np.zeros(n_days)
    for a, b in zip(freeze[:-1], thaw[1:]):
        lo, hi = int(a) + 15, int(b) - 15
        if hi - lo < cfg.melt_max_days:
            continue
        for _ in range(rng.poisson(cfg.melt_rate * (hi - lo) / 180.0)):
            dur = int(rng.integers(cfg.melt_min_days, cfg.melt_max_days + 1))
            s = int(rng.integers(lo, hi - dur + 1))
            prof_days = np.sin(np.pi * (np.arange(dur) + 0.5) / dur)
            seg = slice(max(s, 0), max(min(s + dur, n_days), 0))
            k = seg.stop - seg.start
            if k > 0:
                melt[seg] = np.maximum(melt[seg], prof_days[seg.start - s: seg.start - s + k])
    for s in spring_spells:
        e = s + cfg.spring_melt_days
        # only pixels still solidly frozen take part
        if np.any((s >= freeze[:-1] + 15) & (e <= thaw[1:] - 7)) and 0 <= s and e <= n_days:
            melt[int(s):int(e)] = 1.0
    warm = melt > 0
    spell = cfg.melt_air_k + 1.5 * (melt[warm] - 1.0) + rng.normal(0.0, 0.3, warm.sum())
    air[warm] = np.minimum(np.maximum(air[warm], spell), WARM_SPELL_CEILING_K)

    # TB regime follows the soil with the lake-ice lag at both transitions
    lag = prof.lake_lag_days
    tb_thawed = np.zeros(n_days, dtype=bool)
    for a, b in zip(thaw + lag, freeze + lag):
        tb_thawed[int(max(a, 0)): int(max(min(b, n_days), 0))] = True
    since = np.zeros(n_days)
    for a in thaw + lag:
        idx = np.arange(max(int(a), 0), n_days)
        since[idx] = idx - a
    deficit = prof.summer_residual + (prof.thaw_depression - prof.summer_residual) * np.exp(-since / prof.recovery_days)

    v_winter = prof.tb_v_winter + _ar1(rng, n_days, prof.winter_noise, 0.8)
    v_summer = prof.tb_v_winter - deficit + _ar1(rng, n_days, prof.summer_noise, 0.5)
    tb_v = np.where(tb_thawed, v_summer, v_winter - cfg.melt_depth * melt)
    pol = np.where(tb_thawed, prof.pol_thawed, prof.pol_frozen + cfg.melt_pol * melt)
    tb_v = tb_v + rng.normal(0.0, 0.7, n_days)
    tb_h = tb_v - pol + rng.normal(0.0, 0.7, n_days)
    return tb_v, tb_h, soil, air, frozen, warm


def _overpasses(rng: np.random.Generator, n_days: int, skip_prob: float) -> np.ndarray:
    steps = np.where(rng.random(n_days) < skip_prob, 2, 1)
    days = np.cumsum(np.concatenate([[0], steps]))
    days = days[days < n_days]
    if days[-1] != n_days - 1:
        days = np.append(days, n_days - 1)
    return days


def generate_synthetic(cfg: GenConfig | None = None, n_pixels: int = 200, years: int = 5) -> SyntheticScene:
    """Simulate ``n_pixels`` pixels (round-robin over the configured strata) for ``years`` years."""
    cfg = cfg or GenConfig()
    cfg.validate()
    if n_pixels < 1 or years < 1:
        raise ContractError("n_pixels and years must be >= 1")
    start = np.datetime64(dt.date(cfg.start_year, 1, 1), "D")
    end = np.datetime64(dt.date(cfg.start_year + years, 1, 1), "D")
    dates = np.arange(start, end, dtype="datetime64[D]")
    year_starts = np.array([(np.datetime64(dt.date(cfg.start_year + y, 1, 1), "D") - start).astype(int)
                            for y in range(-1, years + 1)], dtype=np.float64)

    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(n_pixels)
    spells = _spring_spells(cfg, year_starts)
    scene = SyntheticScene([], [], {}, {}, dates)
    width = len(str(n_pixels - 1))
    for i in range(n_pixels):
        rng = np.random.default_rng(seeds[i])
        prof = cfg.strata[i % len(cfg.strata)]
        pid = f"P{i:0{max(width, 4)}d}"
        lo, hi = WATER_BIN_EDGES[prof.water_bin], WATER_BIN_EDGES[prof.water_bin + 1]
        wf = round(float(rng.uniform(lo, hi - 1e-3)), 3)
        tb_v, tb_h, soil, air, frozen, warm = _simulate_pixel(cfg, prof, rng, len(dates), year_starts, spells)
        obs = _overpasses(rng, len(dates), cfg.obs_skip_prob)
        (series,) = interpolate_daily(pid, dates[obs], np.round(tb_v[obs], 2), np.round(tb_h[obs], 2),
                                      max_gap=3, stratum=prof.key)
        scene.tb.append(series)
        scene.temps.append(TempSeries(pid, dates, np.round(soil, 2), np.round(air, 2)))
        scene.truth[pid] = frozen
        scene.ancillary[pid] = (prof.land_cover, wf)
        scene.melt_days[pid] = warm
    return scene
