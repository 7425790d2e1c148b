import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ftcencoder import evaluation as ev
from ftcencoder.datapipe import DEFAULT_STRATA, GenConfig, generate_synthetic, label_segments
from ftcencoder.model import TrainConfig, retrieve, train
from ftcencoder.ndcore import ContractError
from ftcencoder.npr import estimate_references, seasonal_threshold

D0 = np.datetime64("2019-01-01")


def one(pred, ref, start=D0):
    d = start + np.arange(len(pred))
    return {"P": (d, np.asarray(pred, bool))}, {"P": (d, np.asarray(ref, bool))}


class TestConfusionMatrix:
    def test_metric_formulas_on_cell_percentages(self):
        cm = ev.ConfusionMatrix(tp=46.2, tn=41.1, fp=2.8, fn=9.9)
        assert cm.recall_frozen == 46.2 / (46.2 + 9.9)
        assert cm.precision_frozen == 46.2 / (46.2 + 2.8)
        assert cm.accuracy == pytest.approx(0.873, abs=1e-12)
        assert round(100 * cm.precision_frozen, 1) == 94.3

    def test_empty_matrix(self):
        with pytest.raises(ContractError):
            ev.ConfusionMatrix(0, 0, 0, 0).accuracy

    def test_percentages_sum_to_hundred(self):
        p = ev.ConfusionMatrix(3, 5, 1, 1).percentages()
        assert p.total == pytest.approx(100.0)


class TestScore:
    def test_perfect(self):
        cm, cov = ev.score(*one([1, 0, 1, 1], [1, 0, 1, 1]))
        assert cm.accuracy == 1.0 and cm.fp == 0 and cm.fn == 0 and cov.aligned_days == 4

    def test_counts(self):
        cm, _ = ev.score(*one([1, 1, 0, 0, 1], [1, 0, 1, 0, 1]))
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (2, 1, 1, 1)

    def test_missing_days_counted(self):
        pred = {"P": (D0 + np.arange(5), np.ones(5, bool)), "Q": (D0 + np.arange(2), np.ones(2, bool))}
        ref = {"P": (D0 + 2 + np.arange(5), np.ones(5, bool)), "R": (D0 + np.arange(3), np.ones(3, bool))}
        cm, cov = ev.score(pred, ref)
        assert cm.total == 3 == cov.aligned_days
        assert cov.predicted_only_days == 2 + 2 and cov.reference_only_days == 2 + 3
        assert cov.pixels_without_reference == ["Q"] and cov.pixels_without_prediction == ["R"]

    def test_no_overlap_names_ranges(self):
        pred, _ = one([1, 1], [1, 1])
        _, ref = one([1, 1], [1, 1], start=D0 + 100)
        with pytest.raises(ContractError, match="2019-01-01..2019-01-02.*2019-04-11..2019-04-12"):
            ev.score(pred, ref)

    @given(arrays(bool, st.integers(1, 200)), st.data())
    def test_invariants(self, p, data):
        r = data.draw(arrays(bool, len(p)))
        cm, cov = ev.score(*one(p, r))
        assert cm.total == cov.aligned_days == len(p)
        acc = (cm.tp + cm.tn) / cm.total
        assert abs(cm.accuracy - acc) <= 1e-12
        swapped, _ = ev.score(*one(~p, ~r))
        assert (swapped.tp, swapped.tn, swapped.fp, swapped.fn) == (cm.tn, cm.tp, cm.fn, cm.fp)
        for value in cm.metrics().values():
            assert np.isnan(value) or 0 <= value <= 1


class TestBinarize:
    def test_extremes(self):
        assert ev.binarize(np.array([1.0, 0.0])).tolist() == [True, False]

    def test_tie_is_thawed(self):
        assert not ev.binarize(np.array([0.5]), 0.5)[0]

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.2])
    def test_threshold_domain(self, t):
        with pytest.raises(ContractError):
            ev.binarize(np.array([0.3]), t)

    @given(arrays(np.float64, st.integers(1, 50), elements=st.floats(0, 1)), st.floats(0.01, 0.98), st.floats(0, 1))
    def test_monotone_in_threshold(self, p, t, bump):
        hi = t + (0.99 - t) * bump
        assert np.all(ev.binarize(p, hi) <= ev.binarize(p, t))


class TestStratifiedReport:
    def test_groups_and_spread(self):
        d = D0 + np.arange(4)
        pred = {"A": (d, np.array([1, 1, 0, 0], bool)), "B": (d, np.array([1, 0, 0, 0], bool))}
        ref = {"A": (d, np.array([1, 1, 0, 0], bool)), "B": (d, np.array([1, 1, 0, 0], bool))}
        rep = ev.stratified_report(pred, ref, {"A": "WS_wf00-05", "B": "G_wf05-15"})
        assert list(rep) == ["ALL", "G_wf05-15", "WS_wf00-05"]
        assert rep["ALL"].n == 8 and rep["ALL"].n_pixels == 2
        assert rep["WS_wf00-05"].matrix.accuracy == 1.0
        assert rep["ALL"].pixel_accuracy["median"] == pytest.approx(0.875)
        for s in rep.values():
            assert s.pixel_accuracy["p05"] <= s.pixel_accuracy["q25"] <= s.pixel_accuracy["median"] \
                <= s.pixel_accuracy["q75"] <= s.pixel_accuracy["p95"]


class TestFrozenFraction:
    def test_all_frozen_no_onsets(self):
        d = D0 + np.arange(365)
        dates, frac = ev.frozen_fraction({"A": (d, np.ones(365, bool)), "B": (d, np.ones(365, bool))})
        assert np.all(frac == 1.0)
        assert ev.onset_dates(dates, frac) == [ev.Onsets(2019, None, None)]

    def test_half_frozen(self):
        d = D0 + np.arange(3)
        _, frac = ev.frozen_fraction({"A": (d, np.ones(3, bool)), "B": (d, np.zeros(3, bool))})
        assert np.all(frac == 0.5)

    def test_uneven_coverage(self):
        _, frac = ev.frozen_fraction({"A": (D0 + np.arange(2), np.array([True, True])),
                                      "B": (D0 + 1 + np.arange(2), np.array([False, False]))})
        assert frac.tolist() == [1.0, 0.5, 0.0]

    def test_onsets_with_persistence(self):
        d = D0 + np.arange(365)
        frac = np.ones(365)
        frac[100:103] = 0.2  # flicker shorter than the persistence window
        frac[120:280] = 0.1
        (o,) = ev.onset_dates(d, frac)
        assert o.thaw == D0 + 120 and o.freeze == D0 + 280

    def test_freeze_needs_persistence_too(self):
        d = D0 + np.arange(365)
        frac = np.ones(365)
        frac[120:280] = 0.1
        frac[200:203] = 0.9
        (o,) = ev.onset_dates(d, frac)
        assert o.freeze == D0 + 280

    @given(arrays(np.float64, st.integers(1, 80), elements=st.floats(0, 1)))
    def test_smoothing_keeps_range(self, frac):
        sm = ev.moving_average(frac)
        assert np.all((sm >= -1e-12) & (sm <= 1 + 1e-12)) and len(sm) == len(frac)

    def test_shrink_window_ends(self):
        sm = ev.moving_average(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        assert sm[0] == pytest.approx(1 / 3) and sm[1] == pytest.approx(1 / 4) and sm[2] == pytest.approx(1 / 5)


def test_ftc_thaw_onset_lags_baseline_under_spring_melt():
    cfg = GenConfig(strata=(DEFAULT_STRATA[0],), spring_melt_days=8)
    scene = generate_synthetic(cfg, n_pixels=40, years=5)
    split = np.datetime64("2018-01-01")
    segs = []
    for s, t in zip(scene.tb, scene.temps):
        early = s.dates < split
        segs += label_segments(s.select(early), t.select(early))
    model, _ = train(segs, TrainConfig(epochs=50))
    ref = estimate_references(segs)
    ftc, base = {}, {}
    for s in scene.tb:
        late = s.select(s.dates >= split)
        ftc[s.pixel_id] = (late.dates, ev.binarize(retrieve(model, late).p_frozen))
        base[s.pixel_id] = (late.dates, ~seasonal_threshold(late, ref))
    onsets = {}
    for name, data in (("ftc", ftc), ("baseline", base)):
        d, f = ev.frozen_fraction(data)
        onsets[name] = ev.onset_dates(d, ev.moving_average(f))
    for o_ftc, o_base in zip(onsets["ftc"], onsets["baseline"]):
        assert o_ftc.thaw is not None and o_base.thaw is not None
        assert o_ftc.thaw > o_base.thaw
