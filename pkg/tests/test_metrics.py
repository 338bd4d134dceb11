import math

import numpy as np
import pytest

from ffpsurv import (FittedModel, Spell, ValidationError, c_index,
                     evaluate_dataset, fit, generate, integrated_brier,
                     make_setup, predict_survival, risk_score)
from ffpsurv.model import PanelDataset


def _model(delta, beta=(0.0,), alpha=1.0, kappa=1.0, psi=1.0, free=None):
    delta = np.asarray(delta, dtype=float)
    free_mask = delta > 0 if free is None else np.asarray(free, dtype=bool)
    return FittedModel(
        beta=np.asarray(beta, dtype=float), delta=delta, free_mask=free_mask,
        alpha=alpha, kappa=kappa, psi=psi, loglik=0.0, converged=True,
        iterations=0, normalization="free_kappa", clamp_count=0)


class TestPredictSurvival:
    def test_starts_at_one(self):
        curve = predict_survival(_model([0.5, 0.7]), np.array([1.2]))
        assert curve.survival[0] == 1.0
        assert curve.grid[0] == 0.0

    def test_unit_cell_halves(self):
        curve = predict_survival(_model([1.0]), np.array([0.0]))
        assert curve.at(1.0) == pytest.approx(0.5, rel=1e-15)

    def test_censored_history_lifts_curve(self):
        m = _model([0.5, 0.5, 0.5])
        x = np.array([0.3])
        base = predict_survival(m, x)
        hist = (Spell(y=2.0, d=0, x=np.array([0.1])),)
        lifted = predict_survival(m, x, hist)
        assert np.all(lifted.survival[1:] > base.survival[1:])

    def test_monotone_in_time_and_increments(self):
        m1 = _model([0.5, 0.5, 0.5])
        m2 = _model([0.9, 0.5, 0.5])
        x = np.array([0.4])
        c1, c2 = predict_survival(m1, x), predict_survival(m2, x)
        assert np.all(np.diff(c1.survival) <= 0)
        assert np.all(c2.survival[1:] < c1.survival[1:])

    def test_off_grid_query_rejected(self):
        curve = predict_survival(_model([0.5, 0.5]), np.array([0.0]))
        with pytest.raises(ValidationError):
            curve.at(0.25)


class TestRiskScore:
    def test_unit_mean_no_signal_is_one(self):
        m = _model([0.4, 0.4], beta=(0.0, 0.0), alpha=1.3, kappa=1.3)
        for x in (np.zeros(2), np.array([5.0, -2.0])):
            assert risk_score(m, x) == pytest.approx(1.0, rel=1e-15)

    def test_linear_in_feature_effect(self):
        m = _model([0.4], beta=(1.0,))
        s1 = risk_score(m, np.array([0.0]))
        s2 = risk_score(m, np.array([math.log(2.0)]))
        assert s2 == pytest.approx(2.0 * s1, rel=1e-12)

    def test_early_event_raises_score(self):
        m = _model([0.5, 0.5, 0.5])
        x = np.array([0.2])
        hist = (Spell(y=0.0, d=1, x=np.array([0.0])),)
        assert risk_score(m, x, hist) > risk_score(m, x)


class TestCIndex:
    def test_perfect_anti_ordering(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        scores = np.array([4.0, 3.0, 2.0, 1.0])
        d = np.ones(4, dtype=int)
        assert c_index(scores, y, d) == 1.0

    def test_all_ties_give_half(self):
        y = np.array([1.0, 2.0, 3.0])
        assert c_index(np.zeros(3), y, np.ones(3, dtype=int)) == 0.5

    def test_hand_enumerated_pairs(self):
        y = np.array([1.0, 2.0, 3.0])
        d = np.ones(3, dtype=int)
        scores = np.array([3.0, 1.0, 2.0])
        assert c_index(scores, y, d) == pytest.approx(2.0 / 3.0)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=60)
        y = rng.integers(0, 10, size=60).astype(float)
        d = rng.integers(0, 2, size=60)
        base = c_index(scores, y, d)
        assert c_index(np.exp(scores), y, d) == base
        assert c_index(3.0 * scores + 7.0, y, d) == base

    def test_reversal_complement_without_ties(self):
        rng = np.random.default_rng(4)
        scores = rng.normal(size=40)  # continuous: ties almost surely absent
        y = rng.integers(0, 20, size=40).astype(float)
        d = rng.integers(0, 2, size=40)
        assert c_index(scores, y, d) + c_index(-scores, y, d) \
            == pytest.approx(1.0, abs=1e-12)

    def test_no_comparable_pairs_is_error(self):
        with pytest.raises(ValidationError):
            c_index(np.array([1.0, 2.0]), np.array([3.0, 3.0]),
                    np.array([1, 1]))
        with pytest.raises(ValidationError):
            c_index(np.array([1.0, 2.0]), np.array([1.0, 3.0]),
                    np.array([0, 0]))


class TestIntegratedBrier:
    def test_zero_when_sure_survivors_survive(self):
        # all-masked hazard predicts S == 1 everywhere; nobody fails
        m = _model([0.0, 0.0, 0.0], free=[False, False, False])
        ds = PanelDataset(
            subjects=(("a", (Spell(3.0, 0, np.array([0.1])),)),
                      ("b", (Spell(3.0, 0, np.array([-0.2])),))),
            p=1, psi=1.0)
        assert integrated_brier(m, ds, 2.0) == 0.0

    def test_approaches_one_for_sure_survivors_who_fail(self):
        m = _model([0.0, 0.0, 0.0], free=[False, False, False])
        ds = PanelDataset(
            subjects=(("a", (Spell(0.0, 1, np.array([0.1])),)),
                      ("b", (Spell(0.0, 1, np.array([-0.2])),))),
            p=1, psi=1.0)
        assert integrated_brier(m, ds, 3.0) == pytest.approx(1.0)

    def test_two_subject_hand_computation(self):
        # model: beta=0, alpha=kappa=1, increments [0.5, 0.3, 0.2]
        # subject a: event at y=1; subject b: censored at y=2
        m = _model([0.5, 0.3, 0.2])
        ds = PanelDataset(
            subjects=(("a", (Spell(1.0, 1, np.array([0.0])),)),
                      ("b", (Spell(2.0, 0, np.array([0.0])),))),
            p=1, psi=1.0)
        # predicted survival at tau=1,2,3 (phi=1): 1/(1+cum[k])
        s1 = 1.0 / 1.5
        s2 = 1.0 / 1.8
        s3 = 1.0 / 2.0
        # tau=1: a contributes (1_{1>1}=0), b contributes (1_{2>1}=1)
        mse1 = ((0.0 - s1) ** 2 + (1.0 - s1) ** 2) / 2.0
        # tau=2: a contributes (0), b censored at 2 does not (tau < y fails)
        mse2 = (0.0 - s2) ** 2
        # tau=3: a contributes (0), b does not
        mse3 = (0.0 - s3) ** 2
        # trapezoid average over tau = 1..3
        expected = (0.5 * mse1 + mse2 + 0.5 * mse3) / 2.0
        assert integrated_brier(m, ds, 3.0) == pytest.approx(expected, rel=1e-12)

    def test_fitted_model_beats_coin_flip_predictor(self):
        ds = generate(make_setup("1", n=150, seed=55))
        model = fit(ds)
        horizon = 10.0
        ibs_model = integrated_brier(model, ds, horizon)

        taus = np.arange(1.0, horizon + 0.5)
        num = np.zeros(taus.size)
        cnt = np.zeros(taus.size)
        for _, spells in ds.subjects:
            for s in spells:
                mask = np.ones(taus.size, bool) if s.d == 1 else taus < s.y
                num[mask] += ((s.y > taus[mask]).astype(float) - 0.5) ** 2
                cnt[mask] += 1
        mse = num[cnt > 0] / cnt[cnt > 0]
        t = taus[cnt > 0]
        ibs_half = float(np.trapezoid(mse, t) / (t[-1] - t[0]))
        assert ibs_model <= ibs_half

    def test_horizon_validation(self):
        m = _model([0.5, 0.5])
        ds = PanelDataset(
            subjects=(("a", (Spell(0.0, 1, np.array([0.0])),)),), p=1, psi=1.0)
        with pytest.raises(ValidationError):
            integrated_brier(m, ds, 0.0)
        with pytest.raises(ValidationError):
            integrated_brier(m, ds, 7.0)  # past the model grid

    def test_no_contributions_is_error(self):
        m = _model([0.5, 0.5])
        # single subject censored at 0: contributes nowhere
        ds = PanelDataset(
            subjects=(("a", (Spell(0.0, 0, np.array([0.0])),)),), p=1, psi=1.0)
        with pytest.raises(ValidationError):
            integrated_brier(m, ds, 2.0)


class TestEvaluateDataset:
    def test_self_evaluation_beats_chance(self):
        ds = generate(make_setup("1", n=120, seed=66))
        model = fit(ds)
        result = evaluate_dataset(model, ds)
        assert result["c_index"] > 0.5
        assert result["records"] == ds.n_spells
        assert result["ibs"] >= 0.0

    def test_history_flag_changes_scores(self):
        ds = generate(make_setup("1", n=80, seed=67))
        model = fit(ds)
        with_h = evaluate_dataset(model, ds)
        without_h = evaluate_dataset(model, ds, condition_on_history=False)
        assert with_h["c_index"] != without_h["c_index"]
