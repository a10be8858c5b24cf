import numpy as np
import pytest

from dpjl import (
    NoiseSpec,
    TooManyConfigs,
    enumerate_sjlt_moments,
    mc_moments,
    sample_laplace,
)


class TestExhaustiveEnumeration:
    def test_headline_instance(self):
        res = enumerate_sjlt_moments(2, 2, 1, [1.0, 1.0])
        assert res.n == 16
        assert res.mean == pytest.approx(2.0, abs=1e-12)
        assert res.variance == pytest.approx(2.0, abs=1e-12)
        assert res.stderr is None

    def test_single_column_has_no_variance(self):
        res = enumerate_sjlt_moments(1, 6, 2, [3.0])
        assert res.mean == pytest.approx(9.0, abs=1e-12)
        assert res.variance == pytest.approx(0.0, abs=1e-12)

    def test_basis_vector_has_no_variance(self):
        res = enumerate_sjlt_moments(2, 4, 2, [1.0, 0.0])
        assert res.mean == pytest.approx(1.0, abs=1e-12)
        assert res.variance == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("d,k,s,x", [
        (2, 2, 1, [1.0, 1.0]),
        (3, 3, 1, [1.0, 2.0, 3.0]),
        (2, 4, 2, [1.0, 0.5]),
        (4, 4, 2, [0.5, 1.0, -1.0, 2.0]),
        (2, 6, 3, [1.5, -2.0]),
    ])
    def test_mean_and_variance_identities(self, d, k, s, x):
        x = np.asarray(x, dtype=float)
        res = enumerate_sjlt_moments(d, k, s, x)
        norm_sq = float(x @ x)
        ident = (2.0 / k) * (norm_sq**2 - float((x**4).sum()))
        assert abs(res.mean - norm_sq) <= 1e-12 * max(1.0, norm_sq)
        assert abs(res.variance - ident) <= 1e-12 * max(1.0, abs(ident))

    def test_feasibility_guard(self):
        with pytest.raises(TooManyConfigs):
            enumerate_sjlt_moments(10, 8, 2, np.ones(10))  # 8^20 configurations

    def test_noise_moments_folded_analytically(self):
        x = np.array([1.0, 0.5])
        spec = NoiseSpec("laplace", 1.5)
        base = enumerate_sjlt_moments(2, 4, 2, x)
        noisy = enumerate_sjlt_moments(2, 4, 2, x, statistic="est_with_noise_moments", noise=spec)
        e2 = 2 * 1.5**2
        e4 = 24 * 1.5**4
        expected = base.variance + 8 * e2 * float(x @ x) + 2 * 4 * e4 + 2 * 4 * e2**2
        assert noisy.mean == pytest.approx(base.mean, abs=1e-12)
        assert noisy.variance == pytest.approx(expected, rel=1e-12)

    def test_noise_statistic_requires_spec(self):
        with pytest.raises(ValueError):
            enumerate_sjlt_moments(2, 2, 1, [1.0, 1.0], statistic="est_with_noise_moments")


class TestMcMoments:
    def test_constant_closure(self):
        res = mc_moments(lambda rng, n: np.full(n, 7.0), 5000, seed=0)
        assert res.mean == 7.0
        assert res.variance == 0.0
        assert res.n == 5000

    def test_laplace_variance_worked_example(self):
        res = mc_moments(lambda rng, n: sample_laplace(1.0, rng, n), 10**6, seed=1)
        assert abs(res.variance - 2.0) <= 0.02  # E[L^2] = 2 b^2, within 1%
        assert res.stderr == pytest.approx(np.sqrt(res.variance / res.n))

    def test_same_seed_is_bit_identical(self):
        a = mc_moments(lambda rng, n: sample_laplace(1.0, rng, n), 30000, seed=2)
        b = mc_moments(lambda rng, n: sample_laplace(1.0, rng, n), 30000, seed=2)
        assert a == b

    def test_result_independent_of_block_partition_up_to_float_assoc(self):
        # block-derived streams change which draws occur, so only the
        # statistics are comparable: they must agree within a few stderr
        a = mc_moments(lambda rng, n: sample_laplace(1.0, rng, n), 10**5, seed=3, block_size=4096)
        b = mc_moments(lambda rng, n: sample_laplace(1.0, rng, n), 10**5, seed=3, block_size=10**5)
        assert abs(a.mean - b.mean) <= 4 * (a.stderr + b.stderr)

    def test_stderr_shrinks_like_inverse_sqrt(self):
        sizes = [20000, 40000, 80000, 160000]
        errs = [
            mc_moments(lambda rng, n: sample_laplace(1.0, rng, n), n_trials, seed=4).stderr
            for n_trials in sizes
        ]
        for a, b in zip(errs, errs[1:]):
            assert 0.6 <= b / a <= 0.85  # ideal ratio 1/sqrt(2) ~ 0.707

    def test_rejects_empty_run(self):
        with pytest.raises(ValueError):
            mc_moments(lambda rng, n: np.zeros(n), 0, seed=0)
