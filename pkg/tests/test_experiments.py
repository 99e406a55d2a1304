import math

import numpy as np
import pytest

from screenlab.experiments import (DEFAULT_N_GRID, FIGURE1_COLUMNS,
                                   MLE_PRICING_COLUMNS, MonteCarloConfig,
                                   PointPrior, UniformPrior, figure1_curves,
                                   loglog_slope, margin_scan,
                                   mle_pricing_experiment, rate_scan,
                                   tail_rate_scan, two_good_env, worker_count,
                                   write_csv)
from screenlab.gauss import DomainError, lambda_coeff
from screenlab.signals import Box, GaussianLocation, LogisticPurchase
from screenlab.single_good import (ScalarBelief, gaussian_family, laplace_family,
                                   optimal_price_gap)


class TestRateScan:
    def test_uncorrelated_coefficients(self):
        rows, trend = rate_scan((0.3, 0.3), None,
                                tuple(10 ** k for k in range(2, 11)))
        assert trend["lambda_grand"] == pytest.approx(math.sqrt(2.0), abs=1e-12)
        assert trend["lambda_sep_sum"] == pytest.approx(2.0, abs=1e-12)
        assert trend["bd_trend_ok"]
        assert trend["sep_trend_ok"]
        last = rows[-1]
        # convergence in the separate ratio is slow at theta* = 0.3
        assert last["ratio_bd"] == pytest.approx(1.0, abs=0.05)
        assert last["ratio_sep"] == pytest.approx(1.0, abs=0.1)

    def test_correlated_coefficient(self):
        j = np.array([[1.0, 0.5], [0.5, 1.0]])
        _, trend = rate_scan((0.3, 0.3), j, (100, 1000, 10 ** 4, 10 ** 5,
                                             10 ** 6, 10 ** 7))
        assert trend["lambda_grand"] == pytest.approx(math.sqrt(3.0), abs=1e-12)
        assert trend["lambda_sep_sum"] == pytest.approx(2.0, abs=1e-12)

    def test_gap_matches_direct_solver(self):
        rows, _ = rate_scan((0.3, 0.3), None, (1000,))
        _, _, gap = optimal_price_gap(ScalarBelief(mean=0.6,
                                                   sd=math.sqrt(2.0 / 1000.0)))
        assert rows[0]["gap_bd"] == pytest.approx(gap, abs=1e-15)

    def test_decade_range_enforced(self):
        with pytest.raises(DomainError):
            rate_scan((0.3, 0.3), None, (10,))


class TestLoglogSlope:
    def test_bracket(self):
        ns = [10 ** k for k in range(3, 10)]
        gaps = []
        for n in ns:
            _, _, gap = optimal_price_gap(ScalarBelief(mean=0.3,
                                                       sd=1.0 / math.sqrt(n)))
            gaps.append(gap)
        slope = loglog_slope(ns, gaps)
        assert -0.58 < slope < -0.42

    def test_pure_power_law(self):
        ns = [10.0, 100.0, 1000.0]
        assert loglog_slope(ns, [n ** -0.5 for n in ns]) == pytest.approx(
            -0.5, abs=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            loglog_slope([10, 100], [0.1, 0.0])


class TestMarginScan:
    def test_ratio_decreases_and_deltas(self):
        decades = tuple(10 ** k for k in range(2, 11))
        rows, columns = margin_scan(0.3, 1.0, decades)
        ratios = [r["ext_over_int"] for r in rows]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        # underpricing by half the shading keeps rejection losses on the
        # shading scale (the statistic grows), full shading kills them
        half = [r["scaled_ext_delta_0.5"] for r in rows]
        full = [r["scaled_ext_delta_1"] for r in rows]
        assert all(b > a for a, b in zip(half, half[1:]))
        assert all(b < a for a, b in zip(full, full[1:]))
        assert full[-1] < 0.01
        assert "scaled_ext_delta_0.99" in columns

    def test_sigma_free_delta_statistic(self):
        rows1, _ = margin_scan(0.3, 1.0, (10 ** 4,))
        rows2, _ = margin_scan(0.3, 2.0, (10 ** 4,))
        assert rows1[0]["scaled_ext_delta_0.9"] == pytest.approx(
            rows2[0]["scaled_ext_delta_0.9"], rel=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            margin_scan(0.0, 1.0)
        with pytest.raises(DomainError):
            margin_scan(0.3, -1.0)


class TestTailRateScan:
    def test_laplace_trend(self):
        rows, trend = tail_rate_scan(laplace_family(), 1.0,
                                     tuple(10 ** k for k in range(2, 11)))
        assert trend["ratio_trend_ok"]
        assert trend["margins_match_last"]
        assert rows[-1]["scaled_ratio"] == pytest.approx(1.0, abs=0.1)
        # Laplace: hazard elasticity at gamma is exactly 1/gamma
        for r in rows:
            assert r["elasticity_ratio"] == pytest.approx(
                1.0 / r["gamma_star"], rel=1e-9)

    def test_gaussian_reduces_to_main_solver(self):
        rows, _ = tail_rate_scan(gaussian_family(), 1.0, (10 ** 4, 10 ** 6))
        for r in rows:
            _, _, gap = optimal_price_gap(
                ScalarBelief(mean=1.0, sd=1.0 / math.sqrt(r["n"])))
            assert r["gap"] == pytest.approx(gap, rel=1e-6)
            # rate normalization: (ln n / 1)^(1/2) / sqrt(n) for the
            # gaussian family equals the sqrt(ln n / n) scale
            assert r["scaled_ratio"] == pytest.approx(
                gap / math.sqrt(math.log(r["n"]) / r["n"]), rel=1e-6)


class TestFigure1:
    def test_small_grid(self):
        curves, rows = figure1_curves((0.0,), (5, 50), order=41)
        assert len(curves) == 1 and len(rows) == 2
        for r in rows:
            assert r["chain_ok"]
            assert r["flags"] == ""
            assert r["r_fb"] == pytest.approx(0.6, abs=1e-12)
            assert max(r["r_bd"], r["r_sep"]) <= r["r_mix"] + 1e-9
            assert r["r_mix"] <= r["r_sb_upper"] + 1e-9
            assert r["r_sb_upper"] <= 0.6 + 1e-6
        curve = curves[0]
        assert curve.n_grid == (5, 50)
        assert set(curve.columns) == set(FIGURE1_COLUMNS) - {"rho", "n", "flags"}

    def test_determinism_via_csv_bytes(self, tmp_path):
        _, rows1 = figure1_curves((0.5,), (10,), order=41)
        _, rows2 = figure1_curves((0.5,), (10,), order=41)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(p1, FIGURE1_COLUMNS, rows1)
        write_csv(p2, FIGURE1_COLUMNS, rows2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_grid_rejected(self):
        with pytest.raises(DomainError):
            figure1_curves((), (10,))

    def test_default_grid_shape(self):
        assert DEFAULT_N_GRID[0] >= 2
        assert all(b > a for a, b in zip(DEFAULT_N_GRID, DEFAULT_N_GRID[1:]))

    def test_two_good_env_validation(self):
        with pytest.raises(DomainError):
            two_good_env(1.0, 10)


class TestMlePricing:
    def test_plugin_identity_gaussian(self):
        # with the exact theta recovered and an exact information matrix,
        # the posted price is sum(theta) - sqrt(ln n/n) * lambda; check the
        # pipeline's gap against that formula at tiny noise
        cov = 1e-12 * np.eye(2)
        # at n = 1e6 the shading exceeds the estimation noise by
        # sqrt(ln n) ~ 3.7 standard deviations, so every replication sells
        n, reps = 10 ** 6, 50
        model = GaussianLocation(cov=cov)
        config = MonteCarloConfig(model=model,
                                  prior=PointPrior(theta=np.array([0.5, 0.5])),
                                  n_list=(n,), replications=reps, seed=0)
        rows = mle_pricing_experiment(config)
        lam = lambda_coeff(np.ones(2), cov)
        expected_gap = math.sqrt(math.log(n) / n) * lam
        # theta_hat - theta is mean-zero estimation noise; allow 5 standard
        # errors of its replication average
        se = math.sqrt(float(np.ones(2) @ cov @ np.ones(2)) / n) / math.sqrt(reps)
        assert rows[0]["mean_gap"] == pytest.approx(expected_gap, abs=5 * se)
        assert rows[0]["sale_freq"] == 1.0

    def test_determinism_and_columns(self):
        model = LogisticPurchase(beta=2.0, ref_prices=np.array([0.5, 0.5]))
        box = Box(lower=np.array([0.05, 0.05]), upper=np.array([0.95, 0.95]))
        config = MonteCarloConfig(model=model, prior=UniformPrior(box=box),
                                  n_list=(100, 400), replications=50, seed=7,
                                  box=box)
        rows1 = mle_pricing_experiment(config)
        rows2 = mle_pricing_experiment(config)
        assert rows1 == rows2
        for r in rows1:
            assert set(r) == set(MLE_PRICING_COLUMNS)
            assert r["se_revenue"] > 0.0
            assert 0.0 <= r["sale_freq"] <= 1.0
            assert r["mle_failures"] == 0

    def test_seed_changes_output(self):
        model = LogisticPurchase(beta=2.0, ref_prices=np.array([0.5, 0.5]))
        config = MonteCarloConfig(model=model,
                                  prior=PointPrior(theta=np.array([0.5, 0.5])),
                                  n_list=(100,), replications=50, seed=1)
        other = MonteCarloConfig(model=model,
                                 prior=PointPrior(theta=np.array([0.5, 0.5])),
                                 n_list=(100,), replications=50, seed=2)
        assert (mle_pricing_experiment(config)[0]["mean_revenue"]
                != mle_pricing_experiment(other)[0]["mean_revenue"])

    def test_validation(self):
        model = GaussianLocation(cov=np.eye(1))
        with pytest.raises(DomainError):
            MonteCarloConfig(model=model, prior=PointPrior(theta=np.array([0.5])),
                             n_list=(1,), replications=10, seed=0)
        with pytest.raises(DomainError):
            MonteCarloConfig(model=model, prior=PointPrior(theta=np.array([0.5])),
                             n_list=(10,), replications=0, seed=0)


class TestOutputHelpers:
    def test_write_csv_format(self, tmp_path):
        path = tmp_path / "out.csv"
        rows = [{"a": 1, "b": 0.1234567890123456, "c": True, "d": "x"},
                {"a": 2, "b": float(10 ** 10), "c": False, "d": "y"}]
        write_csv(path, ("a", "b", "c", "d"), rows)
        text = path.read_text()
        assert text.splitlines() == [
            "a,b,c,d",
            "1,0.123456789012,1,x",
            "2,10000000000,0,y",
        ]
        assert "\r" not in text

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("SCREENLAB_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("SCREENLAB_THREADS", "0")
        with pytest.raises(DomainError):
            worker_count()
        monkeypatch.setenv("SCREENLAB_THREADS", "two")
        with pytest.raises(DomainError):
            worker_count()
        monkeypatch.delenv("SCREENLAB_THREADS")
        assert worker_count() >= 1
