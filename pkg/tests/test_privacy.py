import math
import warnings

import numpy as np
import pytest

from dpjl import (
    FjltTransform,
    GaussianNeedsDelta,
    InvalidPrivacy,
    InvalidScale,
    NoiseSpec,
    PrivacyParams,
    PrivacyRegimeWarning,
    Rng,
    SchemeMismatch,
    SensitivityPair,
    SjltTransform,
    calibrate,
    calibrate_gaussian,
    calibrate_laplace,
    load_sketch,
    privatize,
    privatize_input_fjlt,
    save_sketch,
    select_mechanism,
)


class TestSelectMechanism:
    def test_worked_examples_s9(self):
        sens = SensitivityPair(delta1=3.0, delta2=1.0)
        # boundary is e^{-9} ~ 1.234e-4
        assert select_mechanism(sens, PrivacyParams(1.0, 1e-5)) == "laplace"
        assert select_mechanism(sens, PrivacyParams(1.0, 1e-6)) == "laplace"
        assert select_mechanism(sens, PrivacyParams(1.0, 1e-3)) == "gaussian"
        assert select_mechanism(sens, PrivacyParams(1.0, 1e-2)) == "gaussian"

    def test_delta_zero_forces_laplace(self):
        sens = SensitivityPair(delta1=100.0, delta2=1.0)
        assert select_mechanism(sens, PrivacyParams(1.0, 0.0)) == "laplace"

    def test_tie_prefers_laplace(self):
        delta = math.exp(-9.0)
        sens = SensitivityPair(delta1=3.0, delta2=1.0)
        assert select_mechanism(sens, PrivacyParams(1.0, delta)) == "laplace"

    def test_exponential_predicate_equals_argmin_form(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            d2 = float(rng.uniform(0.1, 5.0))
            d1 = float(d2 * rng.uniform(1.0, 10.0))  # norm inequality d2 <= d1
            delta = float(10 ** rng.uniform(-12, -0.1))
            sens = SensitivityPair(delta1=d1, delta2=d2)
            by_rule = select_mechanism(sens, PrivacyParams(1.0, delta))
            by_argmin = "laplace" if d1 <= d2 * math.sqrt(math.log(1 / delta)) else "gaussian"
            by_exp = "laplace" if delta <= math.exp(-(d1 / d2) ** 2) else "gaussian"
            assert by_rule == by_argmin == by_exp

    def test_m_statistic_cached(self):
        t = SjltTransform(d=10, k=18, s=9, seed=0)
        sens = SensitivityPair.of(t, delta=1e-3)
        assert sens.delta1 == pytest.approx(3.0)
        assert sens.delta2 == 1.0
        assert sens.m == pytest.approx(min(3.0, math.sqrt(math.log(1e3))))
        assert SensitivityPair.of(t, delta=0.0).m == pytest.approx(3.0)


class TestCalibration:
    def test_laplace_values(self):
        assert calibrate_laplace(2.0, 1.0).scale == 2.0
        assert calibrate_laplace(math.sqrt(4), 0.5).scale == 4.0
        assert calibrate_laplace(0.0, 1.0).scale == 0.0  # zero-sensitivity: no noise

    def test_laplace_rejects_bad_epsilon(self):
        with pytest.raises(InvalidPrivacy):
            calibrate_laplace(1.0, 0.0)

    def test_gaussian_value(self):
        with pytest.warns(PrivacyRegimeWarning):
            spec = calibrate_gaussian(1.0, 1.0, 1e-5)
        assert spec.scale == pytest.approx(math.sqrt(2 * math.log(1.25e5)), rel=1e-15)

    def test_gaussian_linear_in_delta2(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = calibrate_gaussian(1.0, 1.0, 1e-5).scale
            b = calibrate_gaussian(2.0, 1.0, 1e-5).scale
        assert b == pytest.approx(2 * a, rel=1e-15)

    def test_gaussian_needs_delta(self):
        with pytest.raises(GaussianNeedsDelta):
            calibrate_gaussian(1.0, 0.5, 0.0)

    def test_gaussian_rejects_delta_out_of_range(self):
        with pytest.raises(InvalidPrivacy):
            calibrate_gaussian(1.0, 0.5, 1.25)

    def test_regime_warning_only_at_large_epsilon(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            calibrate_gaussian(1.0, 0.5, 1e-5)  # no warning below 1
        with pytest.warns(PrivacyRegimeWarning):
            calibrate_gaussian(1.0, 1.5, 1e-5)

    def test_monotonicity(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sigmas = [calibrate_gaussian(d2, 1.0, 1e-4).scale for d2 in (0.5, 1.0, 2.0)]
            assert sigmas == sorted(sigmas)
            sig_eps = [calibrate_gaussian(1.0, e, 1e-4).scale for e in (0.25, 0.5, 0.9, 2.0)]
            assert all(a > b for a, b in zip(sig_eps, sig_eps[1:]))
        bs = [calibrate_laplace(1.0, e).scale for e in (0.25, 0.5, 1.0, 2.0)]
        assert all(a > b for a, b in zip(bs, bs[1:]))

    def test_calibrate_uses_structural_sjlt_sensitivities(self):
        t = SjltTransform(d=1000, k=18, s=9, seed=0)
        spec = calibrate(t, PrivacyParams(2.0, 1e-6))
        assert spec.kind == "laplace"
        assert spec.scale == pytest.approx(3.0 / 2.0)

    def test_privacy_params_validation(self):
        with pytest.raises(InvalidPrivacy):
            PrivacyParams(0.0, 0.0)
        with pytest.raises(InvalidPrivacy):
            PrivacyParams(1.0, 1.0)


class TestPrivatize:
    def test_zero_scale_returns_exact_projection(self):
        t = SjltTransform(d=8, k=8, s=2, seed=3)
        x = np.arange(8, dtype=float)
        sk = privatize(t, x, NoiseSpec("laplace", 0.0), Rng(0))
        np.testing.assert_array_equal(sk.values, t.apply(x))
        assert sk.scheme == "sjlt_out" and sk.site == "output"

    def test_same_stream_gives_identical_sketch(self):
        t = SjltTransform(d=8, k=8, s=2, seed=3)
        x = np.arange(8, dtype=float)
        spec = calibrate_laplace(math.sqrt(2), 1.0)
        a = privatize(t, x, spec, Rng(5, 1))
        b = privatize(t, x, spec, Rng(5, 1))
        np.testing.assert_array_equal(a.values, b.values)

    def test_noise_is_zero_mean_per_coordinate(self):
        t = SjltTransform(d=8, k=6, s=2, seed=3)
        x = np.array([1.0, -2.0, 0.5, 0.0, 3.0, -0.5, 1.5, 2.0])
        spec = calibrate_laplace(math.sqrt(2), 1.0)
        n = 20000
        root = Rng(17)
        acc = np.zeros(6)
        for i in range(n):
            acc += privatize(t, x, spec, root.substream("trial", i)).values
        mean = acc / n
        stderr = math.sqrt(2 * spec.scale**2 / n)  # per-coordinate noise sd / sqrt(n)
        np.testing.assert_allclose(mean, t.apply(x), atol=4 * stderr)

    def test_fjlt_and_iid_schemes_labelled(self):
        from dpjl import IidGaussianTransform

        f = FjltTransform.create(0.25, 0.2, d=6, k=4, seed=1)
        g = IidGaussianTransform.create(d=6, k=4, seed=1)
        spec = NoiseSpec("gaussian", 0.5, epsilon=0.5, delta=1e-3)
        assert privatize(f, np.ones(6), spec, Rng(0)).scheme == "fjlt_out"
        assert privatize(g, np.ones(6), spec, Rng(0)).scheme == "iid_out"


class TestPrivatizeInputFjlt:
    def setup_method(self):
        self.t = FjltTransform.create(0.25, 0.2, d=6, k=4, c_q=4.0, seed=2)

    def test_floor_value_and_enforcement(self):
        floor = math.sqrt(2 * math.log(1.25e5))
        assert floor == pytest.approx(4.844805262702763, abs=1e-9)
        bad = NoiseSpec("gaussian", floor * 0.99, epsilon=1.0, delta=1e-5)
        with pytest.raises(InvalidScale):
            privatize_input_fjlt(self.t, np.ones(6), bad, Rng(0))
        good = NoiseSpec("gaussian", floor, epsilon=1.0, delta=1e-5)
        sk = privatize_input_fjlt(self.t, np.ones(6), good, Rng(0))
        assert sk.site == "input" and sk.scheme == "fjlt_in"

    def test_zero_noise_reduces_to_apply(self):
        silent = NoiseSpec("gaussian", 0.0)
        x = np.array([1.0, 2.0, -1.0, 0.5, 0.0, 3.0])
        sk = privatize_input_fjlt(self.t, x, silent, Rng(0))
        np.testing.assert_array_equal(sk.values, self.t.apply(x))

    def test_rejects_laplace_and_non_fjlt(self):
        with pytest.raises(SchemeMismatch):
            privatize_input_fjlt(self.t, np.ones(6), NoiseSpec("laplace", 1.0), Rng(0))
        t = SjltTransform(d=6, k=4, s=2, seed=0)
        with pytest.raises(SchemeMismatch):
            privatize_input_fjlt(t, np.ones(6), NoiseSpec("gaussian", 10.0), Rng(0))


class TestSketchFiles:
    def test_roundtrip_is_exact(self, tmp_path):
        t = SjltTransform(d=8, k=8, s=2, seed=3)
        spec = calibrate_laplace(math.sqrt(2), 1.0)
        sk = privatize(t, np.arange(8, dtype=float), spec, Rng(6))
        path = tmp_path / "sk.json"
        save_sketch(sk, path)
        sk2 = load_sketch(path)
        np.testing.assert_array_equal(sk.values, sk2.values)
        assert sk2.noise == sk.noise
        assert sk2.transform_fingerprint == sk.transform_fingerprint
        assert sk2.site == "output" and sk2.scheme == "sjlt_out"
        assert sk2.input_dim == 8 and sk2.sparsity == 2
        assert sk.mismatch_with(sk2) is None

    def test_header_contains_required_fields(self, tmp_path):
        import json

        t = SjltTransform(d=8, k=8, s=2, seed=3)
        sk = privatize(t, np.arange(8, dtype=float), calibrate_laplace(1.0, 2.0), Rng(6))
        path = tmp_path / "sk.json"
        save_sketch(sk, path)
        obj = json.loads(path.read_text())
        for field in ("version", "transform_fingerprint", "kind", "scale", "site",
                      "epsilon", "delta", "k", "values"):
            assert field in obj
        assert obj["k"] == len(obj["values"]) == 8
