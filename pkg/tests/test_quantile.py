import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from seqthin.quantile import (
    QuantileConfig,
    QuantileState,
    RecursiveQuantile,
    beta,
    init_from_sample,
    init_indices,
    step,
)


class TestConfig:
    def test_valid_defaults(self):
        cfg = QuantileConfig(alpha=0.1)
        assert cfg.q_exp == 5 / 8 and cfg.gamma == 1 / 10

    @pytest.mark.parametrize(
        "kw",
        [
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"alpha": 0.1, "q_exp": 0.5},
            {"alpha": 0.1, "q_exp": 1.2},
            {"alpha": 0.1, "gamma": 0.2},  # q - gamma must exceed 1/2
            {"alpha": 0.1, "gamma": 0.0},
            {"alpha": 0.1, "beta_floor": -1.0},
            {"alpha": 0.1, "h_floor": 0.0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            QuantileConfig(**kw)


class TestInit:
    def test_worked_example(self):
        cfg = QuantileConfig(alpha=0.5, q_exp=0.75, gamma=0.1)
        s = init_from_sample(cfg, np.arange(10, 0, -1.0))
        assert s.c_hat == 5.0
        assert s.beta0 == pytest.approx(10 / 6)
        assert s.h_base == 6.0
        assert s.k == 10
        # kernel count around C with h_k0 = 6 / 10^0.1
        h = 6.0 / 10**0.1
        expected = np.count_nonzero(np.abs(np.arange(1, 11) - 5.0) <= h) / (2 * 10 * h)
        assert s.f_hat == pytest.approx(expected)

    def test_indices_k0_10(self):
        assert init_indices(0.5, 10) == (5, 8, 2)

    def test_indices_k0_15(self):
        i_c, _, k_minus = init_indices(0.1, 15)
        assert i_c == 14
        assert k_minus == 12

    def test_constant_sample_clamps_bandwidth(self):
        cfg = QuantileConfig(alpha=0.2)
        s = init_from_sample(cfg, np.full(20, 3.0))
        assert s.c_hat == 3.0
        assert s.h_base == pytest.approx(cfg.h_floor * 3.0)
        assert s.h_base > 0

    def test_errors(self):
        cfg = QuantileConfig(alpha=0.2)
        with pytest.raises(ValueError):
            init_from_sample(cfg, [1.0])
        with pytest.raises(ValueError):
            init_from_sample(cfg, [1.0, 2.0, 3.0], k0=4)
        with pytest.raises(ValueError):
            init_from_sample(cfg, [1.0, math.inf])


class TestBeta:
    def _state(self, f_hat, beta0=2.0):
        return QuantileState(c_hat=0.0, f_hat=f_hat, beta0=beta0, h_base=1.0, k=1)

    def test_zero_density(self):
        assert beta(self._state(0.0), QuantileConfig(alpha=0.1), 1) == 2.0

    def test_density_branch(self):
        assert beta(self._state(10.0), QuantileConfig(alpha=0.1), 1) == pytest.approx(0.1)

    def test_floor(self):
        cfg = QuantileConfig(alpha=0.1, beta_floor=0.5)
        assert beta(self._state(10.0), cfg, 1) == 0.5

    def test_cap_grows(self):
        cfg = QuantileConfig(alpha=0.1)
        assert beta(self._state(0.0), cfg, 1000) == pytest.approx(2.0 * 1000**0.1)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            beta(self._state(1.0), QuantileConfig(alpha=0.1), 0)


class TestStep:
    def _state(self):
        # beta_0 = 1 and f_hat = 1 give beta_k = 1 at k = 0 (k + 1 = 1)
        return QuantileState(c_hat=0.0, f_hat=1.0, beta0=1.0, h_base=1.0, k=0)

    def test_hit(self):
        s = step(self._state(), QuantileConfig(alpha=0.1), 1.0)
        assert s.c_hat == pytest.approx(0.9)
        assert s.k == 1

    def test_miss(self):
        s = step(self._state(), QuantileConfig(alpha=0.1), -1.0)
        assert s.c_hat == pytest.approx(-0.1)

    def test_tie_counts_as_hit(self):
        s = step(self._state(), QuantileConfig(alpha=0.1), 0.0)
        assert s.c_hat == pytest.approx(0.9)

    def test_density_uses_pre_update_estimate(self):
        cfg = QuantileConfig(alpha=0.1)
        s = QuantileState(c_hat=0.0, f_hat=0.0, beta0=1.0, h_base=1.0, k=1)
        step(s, cfg, 0.5)
        h2 = 1.0 / 2**0.1
        assert s.f_hat == pytest.approx((1.0 / (2 * h2)) / 2**cfg.q_exp)

    def test_alpha_override(self):
        s = step(self._state(), QuantileConfig(alpha=0.1), -1.0, alpha=0.4)
        assert s.c_hat == pytest.approx(-0.4)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            step(self._state(), QuantileConfig(alpha=0.1), math.inf)

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        alpha=st.floats(0.01, 0.9),
        q_exp=st.sampled_from([0.6, 5 / 8, 0.8, 1.0]),
    )
    def test_drift_bound_and_positive_density(self, seed, alpha, q_exp):
        cfg = QuantileConfig(alpha=alpha, q_exp=q_exp, gamma=min(0.1, (q_exp - 0.5) / 2))
        rng = np.random.default_rng(seed)
        s = init_from_sample(cfg, rng.standard_normal(20))
        for z in rng.standard_cauchy(500):
            b = beta(s, cfg)
            bound = b * max(alpha, 1 - alpha) / (s.k + 1) ** q_exp
            c_old = s.c_hat
            step(s, cfg, float(z))
            assert abs(s.c_hat - c_old) <= bound * (1 + 1e-12)
            assert s.f_hat >= 0.0


def _median_error(dist, q_exp, seeds=range(5), n=100_000, alpha=0.1):
    target = dist.ppf(1 - alpha)
    errs = []
    for seed in seeds:
        z = dist.rvs(size=n, random_state=np.random.default_rng(seed))
        est = RecursiveQuantile(alpha=alpha, q_exp=q_exp, k0=50).fit(z)
        errs.append(abs(est.quantile_ - target))
    return float(np.median(errs))


class TestConvergence:
    @pytest.mark.parametrize("dist", [stats.uniform, stats.norm, stats.expon], ids=["uniform", "normal", "expon"])
    def test_unit_step_exponent(self, dist):
        assert _median_error(dist, q_exp=1.0) < 0.03

    @pytest.mark.parametrize("dist", [stats.uniform, stats.norm], ids=["uniform", "normal"])
    def test_default_step_exponent(self, dist):
        assert _median_error(dist, q_exp=5 / 8) < 0.03

    def test_default_exponent_matches_linearized_variance(self):
        # for q < 1 the error is roughly normal with variance
        # alpha (1 - alpha) / (2 f^2 k^q); check the exponential case
        # (density 0.1 at the quantile) against 3 standard deviations
        alpha, k, q = 0.1, 100_000, 5 / 8
        f = stats.expon.pdf(stats.expon.ppf(1 - alpha))
        sd = math.sqrt(alpha * (1 - alpha) / (2 * f**2 * k**q))
        assert _median_error(stats.expon, q_exp=q) < 3 * sd

    @pytest.mark.slow
    def test_density_estimate_stays_bounded(self):
        rng = np.random.default_rng(17)
        for z, sup in ((rng.uniform(size=1_000_000), 1.0), (rng.standard_normal(1_000_000), stats.norm.pdf(0))):
            est = RecursiveQuantile(alpha=0.1, k0=50).fit(z[:50])
            cfg, s = est.cfg_, est.state_
            worst = 0.0
            for v in z[50:].tolist():
                step(s, cfg, v)
                if s.f_hat > worst:
                    worst = s.f_hat
            assert 0.0 <= worst <= 10 * sup


class TestEstimator:
    def test_partial_fit_equals_fit(self):
        z = np.random.default_rng(1).standard_normal(3000)
        a = RecursiveQuantile(alpha=0.2, k0=30).fit(z)
        b = RecursiveQuantile(alpha=0.2, k0=30)
        for chunk in np.array_split(z, 7):
            b.partial_fit(chunk)
        assert a.quantile_ == b.quantile_
        assert a.density_ == b.density_
        assert a.n_seen_ == b.n_seen_ == 3000

    def test_refit_resets(self):
        z = np.random.default_rng(2).standard_normal(500)
        est = RecursiveQuantile(k0=20).fit(z)
        first = est.quantile_
        assert est.fit(z).quantile_ == first

    def test_get_params(self):
        est = RecursiveQuantile(alpha=0.3, k0=40)
        assert est.get_params()["alpha"] == 0.3
        assert est.set_params(k0=12).k0 == 12
