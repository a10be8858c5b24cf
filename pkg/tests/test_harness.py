import io
import math

import numpy as np
import pytest

from dpjl import (
    NoiseSpec,
    Rng,
    SjltTransform,
    bench_time,
    bench_variance,
    calibrate_laplace,
    estimator_sampler,
    mc_moments,
    sample_laplace,
    spread_vector,
)
from dpjl.estimators import bias_term
from dpjl.harness import BENCH_COLUMNS, BENCH_CSV_VERSION, write_bench_csv


class TestSamplers:
    def test_sjlt_batch_equals_object_path_bit_for_bit(self):
        # The batched sampler must realize exactly the transforms and noise
        # that per-trial objects with the same seeds would produce.
        z = np.array([1.0, -0.5, 2.0, 0.25, -1.0, 0.5, 1.5, -0.75])
        d, k, s = 8, 8, 2
        spec = calibrate_laplace(math.sqrt(s), 1.0)
        sampler = estimator_sampler("sjlt_out", z, k, spec, s=s)
        n = 64
        batch = sampler(Rng(123, 9), n)

        rng = Rng(123, 9)
        seeds = rng.seeds(n)
        eta = sample_laplace(spec.scale, rng, (n, k))
        mu = sample_laplace(spec.scale, rng, (n, k))
        bias = bias_term("sjlt_out", spec, k)
        manual = np.empty(n)
        for t in range(n):
            transform = SjltTransform(d=d, k=k, s=s, seed=int(seeds[t]))
            u = transform.apply(z) + (eta[t] - mu[t])
            manual[t] = (u**2).sum() - bias
        np.testing.assert_array_equal(batch, manual)

    def test_sjlt_unbiased_at_modest_n(self):
        z = spread_vector(9.0, 12)
        spec = calibrate_laplace(math.sqrt(3), 1.0)
        res = mc_moments(estimator_sampler("sjlt_out", z, 12, spec, s=3),
                         40000, seed=5, block_size=4096)
        assert abs(res.mean - 9.0) <= 4 * res.stderr

    def test_iid_object_path_lpp(self):
        # the class API itself satisfies length preservation in expectation
        from dpjl import IidGaussianTransform

        z = spread_vector(4.0, 10)
        n = 4000
        vals = np.empty(n)
        for t in range(n):
            tr = IidGaussianTransform.create(d=10, k=6, seed=t)
            y = tr.apply(z)
            vals[t] = y @ y
        stderr = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - 4.0) <= 4 * stderr

    def test_fjlt_object_path_lpp(self):
        from dpjl import FjltTransform

        z = spread_vector(4.0, 10)
        n = 4000
        vals = np.empty(n)
        for t in range(n):
            tr = FjltTransform.create(0.25, 0.1, d=10, k=6, c_q=4.0, seed=t)
            y = tr.apply(z)
            vals[t] = y @ y
        stderr = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - 4.0) <= 4 * stderr

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            estimator_sampler("nope", np.ones(4), 4, NoiseSpec("laplace", 1.0))
        with pytest.raises(ValueError):
            estimator_sampler("sjlt_out", np.ones(4), 4, NoiseSpec("laplace", 1.0))  # missing s


class TestSpreadVector:
    def test_norm_and_determinism(self):
        z = spread_vector(450.0, 64)
        assert z @ z == pytest.approx(450.0, rel=1e-12)
        np.testing.assert_array_equal(z, spread_vector(450.0, 64))


class TestBenchVariance:
    def test_analytic_only_rows(self):
        rows, analysis = bench_variance(
            schemes=["sjlt-laplace", "sjlt-gaussian"],
            dist_sq=450.0, delta_grid=[1e-2, 1e-6], epsilon=1.0,
            trials=0, seed=1, d=64, k=45, s=9,
        )
        assert len(rows) == 4
        assert all(r.est_mean is None and r.est_var_empirical is None for r in rows)
        assert all(r.est_var_analytic > 0 for r in rows)
        assert all("empirical_winner=n/a" in line for line in analysis)

    def test_csv_reproducible_byte_for_byte(self):
        out = []
        for _ in range(2):
            rows, _ = bench_variance(
                schemes=["sjlt-laplace", "sjlt-gaussian"],
                dist_sq=50.0, delta_grid=[1e-2, 1e-5], epsilon=1.0,
                trials=500, seed=42, d=16, k=8, s=2,
            )
            buf = io.StringIO()
            write_bench_csv(rows, buf, no_timing=True)
            out.append(buf.getvalue())
        assert out[0] == out[1]
        header = out[0].splitlines()
        assert header[0] == BENCH_CSV_VERSION
        assert header[1] == BENCH_COLUMNS

    def test_laplace_rows_reuse_single_mc(self):
        rows, _ = bench_variance(
            schemes=["sjlt-laplace"], dist_sq=10.0, delta_grid=[1e-2, 1e-4, 1e-6],
            epsilon=1.0, trials=300, seed=7, d=8, k=4, s=2,
        )
        means = {r.est_mean for r in rows}
        assert len(means) == 1  # delta does not affect the Laplace mechanism

    def test_epsilon_scaling_of_laplace_noise_terms(self):
        # quadrupled epsilon scales the k-term of the noise variance by 4^-4
        from dpjl import analytic_noise_terms

        k = 8
        lo = analytic_noise_terms("sjlt_out", calibrate_laplace(3.0, 1.0), k, 0.0)
        hi = analytic_noise_terms("sjlt_out", calibrate_laplace(3.0, 4.0), k, 0.0)
        assert lo / hi == pytest.approx(4.0**4, rel=1e-12)

    def test_rejects_bad_tokens(self):
        with pytest.raises(ValueError):
            bench_variance(["sjlt-cauchy"], 1.0, [1e-3], 1.0, 0, 0, d=4, k=4, s=2)
        with pytest.raises(ValueError):
            bench_variance(["sjlt-laplace"], 1.0, [1e-3], 1.0, 0, 0, d=4, k=5, s=2)


class TestBenchTime:
    def test_smoke_and_predicates(self):
        rows, lines = bench_time(d=1024, k=64, s_values=[4], trials=5, seed=3,
                                 alpha=0.25, beta=0.01)
        ops = {r.op for r in rows}
        assert {"sjlt_apply", "fjlt_apply", "iid_apply", "fwht"} <= ops
        kinds = {(r.op, r.input_kind) for r in rows}
        assert ("sjlt_apply", "sparse") in kinds and ("iid_apply", "dense") in kinds
        assert len(lines) == 1 and "heuristic" in lines[0]
        assert all(r.median_ns > 0 for r in rows)

    def test_fwht_rows_double_in_dimension(self):
        rows, _ = bench_time(d=4096, k=16, s_values=[2], trials=3, seed=3)
        dims = [r.d for r in rows if r.op == "fwht"]
        assert dims == [1024, 2048, 4096]
