import json

import numpy as np
import pytest
import statsmodels.api as sm
from scipy import stats

from biteweight.baseline import (FEATURE_NAMES, N_FEATURES, SEGMENTS, AmftModel, Selection, amft_features,
                                 amft_fit, segment_indices, spearman, spearman_select, stepwise_select)
from biteweight.dataset import Bout, ChewAnnotation, Food, Recording
from biteweight.estimators import model_from_json

FS = 44100


def make_bout(starts, durs, amp=0.1, n_audio=None):
    chews = tuple(ChewAnnotation(s, s + d) for s, d in zip(starts, durs))
    n_audio = n_audio or int((chews[-1].stop_s + 0.5) * FS)
    rec = Recording("r", "S1", np.full(n_audio, amp, np.float32),
                    (Bout("S1", Food.APPLE, chews, 4.0),))
    return rec.bouts[0], rec


def block(vec, seg):
    i = SEGMENTS.index(seg)
    return vec[8 * i: 8 * (i + 1)]


def test_length_always_50(small_ds):
    assert N_FEATURES == len(FEATURE_NAMES) == 50
    for ref in small_ds.bout_refs():
        v = amft_features(ref.bout, ref.recording)
        assert v.shape == (50,) and np.all(np.isfinite(v))
    for n in (1, 2, 4, 7):
        b, rec = make_bout(np.arange(n) * 0.5, [0.2] * n)
        assert amft_features(b, rec).shape == (50,)


def test_three_chews_first3_equals_whole():
    b, rec = make_bout([0.0, 0.4, 1.1], [0.2, 0.25, 0.1])
    v = amft_features(b, rec)
    np.testing.assert_array_equal(block(v, "first_3"), block(v, "whole"))


def test_uniform_six_chews_thirds_equal():
    b, rec = make_bout(np.arange(6) * 0.5, [0.2] * 6)
    v = amft_features(b, rec)
    np.testing.assert_allclose(block(v, "third_1"), block(v, "third_2"), atol=1e-12)
    np.testing.assert_allclose(block(v, "third_2"), block(v, "third_3"), atol=1e-12)


def test_segment_indices():
    assert segment_indices(6) == [(0, 6), (0, 2), (2, 4), (4, 6), (0, 3), (0, 5)]
    # one chew: empty thirds fall back to the whole bout
    assert segment_indices(1) == [(0, 1)] * 6


def test_time_translation_invariance(small_ds):
    ref = small_ds.bout_refs()[0]
    shift = 0.25
    pad = np.zeros(int(shift * FS), np.float32)
    rec2 = Recording("r", ref.recording.subject_id, np.concatenate([pad, ref.recording.samples]),
                     (Bout(ref.bout.subject_id, ref.bout.food,
                           tuple(ChewAnnotation(c.start_s + shift, c.stop_s + shift) for c in ref.bout.chews),
                           ref.bout.weight_g),))
    np.testing.assert_allclose(amft_features(rec2.bouts[0], rec2), amft_features(ref.bout, ref.recording),
                               atol=1e-9)


def test_spearman_monotone():
    x = np.arange(10.0)
    assert spearman(x, x ** 3) == 1.0
    assert spearman(x, -x) == -1.0


def test_spearman_ties_by_hand():
    # ranks x = (1.5, 1.5, 3), y = (1, 3, 2); centred dot product is 0
    assert spearman([1, 1, 2], [3, 5, 4]) == 0.0


def test_spearman_constant():
    assert spearman([1, 1, 1, 1], [1, 2, 3, 4]) == 0.0


def test_spearman_rank_pearson_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(3, 40))
        x = rng.integers(0, 6, n).astype(float)
        y = rng.standard_normal(n)
        rx, ry = stats.rankdata(x), stats.rankdata(y)
        if rx.std() == 0:
            continue
        assert abs(spearman(x, y) - np.corrcoef(rx, ry)[0, 1]) <= 1e-12


def test_spearman_selects_ten(rng):
    X = rng.standard_normal((30, 50))
    y = rng.standard_normal(30)
    assert len(spearman_select(X, y)) == 10


def test_exact_feature_selected_first(rng):
    X = rng.standard_normal((30, 50))
    y = X[:, 17] * 2 + 1
    rho = [abs(spearman(X[:, j], y)) for j in range(50)]
    assert int(np.argmax(rho)) == 17 and 17 in spearman_select(X, y)
    sse = [np.sum((y - np.polyval(np.polyfit(X[:, j], y, 1), X[:, j])) ** 2) for j in range(50)]
    assert int(np.argmin(sse)) == 17 and 17 in stepwise_select(X, y)


def _check_fixpoint(X, y, sel):
    """Every kept feature has partial p <= 0.10; no excluded one would enter at p < 0.05."""
    if sel:
        p_kept = sm.OLS(y, sm.add_constant(X[:, sel])).fit().pvalues[1:]
        assert np.all(p_kept <= 0.10 + 1e-9)
    for j in range(X.shape[1]):
        if j in sel:
            continue
        p_new = sm.OLS(y, sm.add_constant(X[:, sel + [j]])).fit().pvalues[-1]
        assert p_new >= 0.05 - 1e-9


def test_stepwise_noise_fixed_seed():
    r = np.random.default_rng(1)
    X, y = r.standard_normal((40, 50)), r.standard_normal(40)
    sel = stepwise_select(X, y)
    assert len(sel) <= 2
    _check_fixpoint(X, y, sel)


def test_stepwise_terminates_on_noise():
    for seed in range(100):
        r = np.random.default_rng(seed)
        X, y = r.standard_normal((40, 50)), r.standard_normal(40)
        sel = stepwise_select(X, y)
        assert len(sel) < 40
        _check_fixpoint(X, y, sel)


@pytest.mark.parametrize("method", list(Selection))
def test_amft_model_round_trip(rng, method):
    X = rng.standard_normal((30, 50))
    y = 3 * X[:, 4] + 10 + 0.01 * rng.standard_normal(30)
    m = amft_fit(X, y, method)
    assert 4 in m.selected
    again = AmftModel.from_json(json.loads(json.dumps(m.to_json())))
    assert again.selected == m.selected
    np.testing.assert_array_equal(again.predict(X), m.predict(X))
    np.testing.assert_allclose(m.predict(X), y, atol=0.1)


def test_amft_empty_selection_predicts_mean():
    r = np.random.default_rng(15)
    X = r.standard_normal((40, 50))
    y = r.standard_normal(40) + 3
    m = amft_fit(X, y, Selection.STEPWISE)
    assert m.selected == []
    np.testing.assert_allclose(m.predict(X), y.mean(), atol=1e-6)


def test_amft_rejects_wrong_width(rng):
    with pytest.raises(ValueError):
        amft_fit(rng.standard_normal((20, 10)), rng.standard_normal(20))
