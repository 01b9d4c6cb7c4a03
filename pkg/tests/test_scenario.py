"""Scene construction: steering vectors, covariances, synthesis, SINR."""

import math

import numpy as np
import pytest

from eccmsim.scenario import (
    ArrayGeometry,
    JammerSpec,
    ScenarioConfig,
    amplitude_for_sinr,
    build_covariances,
    draw_cut,
    sinr_db,
    steering_vector,
    synthesize,
)
from eccmsim.presets import joint_attack_scenario, nlj_scenario


GEOM16 = ArrayGeometry(16, 0.5)


class TestSteeringVector:
    def test_broadside_is_all_ones(self):
        v = steering_vector(ArrayGeometry(4, 0.5), 0.0)
        np.testing.assert_allclose(v, np.ones(4), atol=1e-15)

    def test_thirty_degrees_quarter_turns(self):
        # sin(30 deg) = 1/2, so phases step by pi/2: [1, j, -1].
        v = steering_vector(ArrayGeometry(3, 0.5), 30.0)
        np.testing.assert_allclose(v, [1.0, 1.0j, -1.0], atol=1e-12)

    def test_endfire_limit(self):
        v = steering_vector(ArrayGeometry(2, 0.5), 89.999)
        assert v[0] == 1.0
        assert abs(v[1] - (-1.0)) < 1e-3

    def test_unit_modulus(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            geom = ArrayGeometry(int(rng.integers(2, 30)), float(rng.uniform(0.1, 2.0)))
            v = steering_vector(geom, float(rng.uniform(-89.9, 89.9)))
            np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-14)
            assert v[0] == 1.0

    @pytest.mark.parametrize("aoa", [-90.0, 90.0, 120.0])
    def test_rejects_out_of_range(self, aoa):
        with pytest.raises(ValueError):
            steering_vector(GEOM16, aoa)


class TestValidation:
    def test_geometry_bounds(self):
        with pytest.raises(ValueError):
            ArrayGeometry(1, 0.5)
        with pytest.raises(ValueError):
            ArrayGeometry(4, 0.0)

    def test_jammer_kind(self):
        with pytest.raises(ValueError):
            JammerSpec("pulsed", 0.0, 30.0)

    def test_scenario_bounds(self):
        with pytest.raises(ValueError):
            ScenarioConfig(geometry=GEOM16, noise_power=0.0)
        with pytest.raises(ValueError):
            ScenarioConfig(geometry=GEOM16, clutter_one_lag=1.0)
        with pytest.raises(ValueError):
            ScenarioConfig(geometry=GEOM16, n_train_clutter=0)


class TestBuildCovariances:
    def test_pure_noise_is_identity(self):
        config = ScenarioConfig(
            geometry=ArrayGeometry(6, 0.5),
            noise_power=1.0,
            cnr_db=-math.inf,
            n_train_clutter=4,
            n_train_clear=4,
        )
        cov = build_covariances(config)
        np.testing.assert_allclose(cov.cut_cov, np.eye(6), atol=1e-15)
        np.testing.assert_allclose(cov.clear_cov, np.eye(6), atol=1e-15)

    def test_single_jammer_rank_one_spike(self):
        config = ScenarioConfig(
            geometry=GEOM16,
            cnr_db=-math.inf,
            jammers=(JammerSpec("noise_like", 10.0, 30.0),),
            n_train_clutter=4,
            n_train_clear=4,
        )
        cov = build_covariances(config)
        eigs = np.linalg.eigvalsh(cov.clear_cov)
        assert eigs[-1] == pytest.approx(1.0 + 1000.0 * 16, rel=1e-12)
        # eigensolver roundoff scales with the 16001 top eigenvalue
        np.testing.assert_allclose(eigs[:-1], 1.0, atol=1e-10 * eigs[-1])

    def test_three_jammer_scenario_eigenvalue_split(self):
        # Eigendecomposition oracle: exactly 3 eigenvalues above the noise
        # floor for 3 well-separated 30 dB jammers, 13 exactly at it.
        cov = build_covariances(nlj_scenario())
        eigs = np.linalg.eigvalsh(cov.clear_cov)
        assert np.all(eigs[-3:] > 100.0)
        np.testing.assert_allclose(eigs[:-3], 1.0, atol=1e-10 * eigs[-1])

    def test_trace_identity(self):
        config = nlj_scenario()
        cov = build_covariances(config)
        expected = 16 * 1.0 * (1.0 + 3 * 1000.0)
        assert np.trace(cov.clear_cov).real == pytest.approx(expected, rel=1e-12)

    def test_structure_and_hermitian(self):
        config = joint_attack_scenario()
        cov = build_covariances(config)
        for mat in (cov.cut_cov, cov.clear_cov, cov.clutter_cov, cov.jammer_cov):
            np.testing.assert_allclose(mat, mat.conj().T, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(
            cov.cut_cov, cov.clear_cov + cov.clutter_cov, rtol=1e-14
        )
        np.testing.assert_allclose(
            cov.clear_cov, np.eye(16) + cov.jammer_cov, rtol=1e-14
        )
        clutter_unit = 0.9 ** np.abs(np.subtract.outer(np.arange(16), np.arange(16)))
        np.testing.assert_allclose(cov.clutter_cov, 100.0 * clutter_unit, rtol=1e-14)
        np.linalg.cholesky(cov.cut_cov)
        np.linalg.cholesky(cov.clear_cov)


class TestSynthesize:
    def test_deterministic_and_pure(self):
        config = nlj_scenario()
        cov = build_covariances(config)
        a = synthesize(config, cov, 1.0 + 2.0j, "H1", 123)
        b = synthesize(config, cov, 1.0 + 2.0j, "H1", 123)
        np.testing.assert_array_equal(a.cut, b.cut)
        np.testing.assert_array_equal(a.train_clutter, b.train_clutter)
        np.testing.assert_array_equal(a.train_clear, b.train_clear)
        c = synthesize(config, cov, 1.0 + 2.0j, "H1", 124)
        assert not np.array_equal(a.cut, c.cut)

    def test_zero_amplitude_h1_equals_h00(self):
        config = nlj_scenario()
        cov = build_covariances(config)
        h1 = synthesize(config, cov, 0.0, "H1", 5)
        h0 = synthesize(config, cov, 0.0, "H00", 5)
        np.testing.assert_array_equal(h1.cut, h0.cut)

    def test_hypothesis_config_mismatch_rejected(self):
        plain = nlj_scenario()
        joint = joint_attack_scenario()
        cov_plain = build_covariances(plain)
        cov_joint = build_covariances(joint)
        with pytest.raises(ValueError):
            synthesize(plain, cov_plain, 1.0, "H2", 0)
        with pytest.raises(ValueError):
            synthesize(joint, cov_joint, 1.0, "H1", 0)
        with pytest.raises(ValueError):
            synthesize(plain, cov_plain, 1.0, "H4", 0)

    def test_draw_cut_matches_synthesize(self):
        for config, hyp in [(nlj_scenario(), "H1"), (joint_attack_scenario(), "H3")]:
            cov = build_covariances(config)
            for seed in (0, 1, 99):
                full = synthesize(config, cov, 2.0 - 1.0j, hyp, seed)
                np.testing.assert_array_equal(
                    draw_cut(config, cov, 2.0 - 1.0j, hyp, seed), full.cut
                )

    def test_mean_structure_under_h3(self):
        # Averaging draws isolates the deterministic component: target
        # amplitude times its steering vector plus the jammer amplitudes.
        config = joint_attack_scenario()
        cov = build_covariances(config)
        n_draws = 4000
        acc = np.zeros(16, dtype=complex)
        for i in range(n_draws):
            acc += draw_cut(config, cov, 3.0, "H3", i)
        mean = acc / n_draws
        expected = 3.0 * steering_vector(config.geometry, 0.0)
        for jam in config.coherent_jammers:
            expected = expected + math.sqrt(10 ** (jam.power_db / 10)) * steering_vector(
                config.geometry, jam.aoa_deg
            )
        # CN(0, cut_cov) noise has per-element std ~ sqrt(lam_max)/sqrt(n).
        scale = math.sqrt(np.linalg.eigvalsh(cov.cut_cov)[-1] / n_draws)
        assert np.max(np.abs(mean - expected)) < 6 * scale

    def test_sample_covariance_converges_to_model(self):
        # Law-of-large-numbers oracle at 4e5 draws; the relative Frobenius
        # error of the sample covariance scales as tr(C)/(||C||_F sqrt(n)).
        config = nlj_scenario()
        cov = build_covariances(config)
        n_draws = 400_000
        acc = np.zeros((16, 16), dtype=complex)
        batch = 1000
        for start in range(0, n_draws, batch):
            block = np.stack(
                [draw_cut(config, cov, 0.0, "H00", seed) for seed in range(start, start + batch)],
                axis=1,
            )
            acc += block @ block.conj().T
        sample = acc / n_draws
        rel = np.linalg.norm(sample - cov.cut_cov) / np.linalg.norm(cov.cut_cov)
        predicted = np.trace(cov.cut_cov).real / np.linalg.norm(cov.cut_cov) / math.sqrt(n_draws)
        assert rel < 3 * predicted


class TestSinr:
    def test_identity_covariance(self):
        config = ScenarioConfig(
            geometry=GEOM16, cnr_db=-math.inf, n_train_clutter=4, n_train_clear=4
        )
        cov = build_covariances(config)
        v = steering_vector(GEOM16, 0.0)
        assert sinr_db(1.0, cov, v) == pytest.approx(10 * math.log10(16), abs=1e-10)

    def test_zero_amplitude_sentinel(self):
        cov = build_covariances(nlj_scenario())
        v = steering_vector(GEOM16, 0.0)
        assert sinr_db(0.0, cov, v) == -math.inf
        assert amplitude_for_sinr(-math.inf, cov, v) == 0.0

    def test_round_trip(self):
        cov = build_covariances(nlj_scenario())
        v = steering_vector(GEOM16, 0.0)
        amp = amplitude_for_sinr(20.0, cov, v)
        assert sinr_db(amp, cov, v) == pytest.approx(20.0, abs=1e-9)


class TestConfigSerialization:
    def test_json_round_trip(self, tmp_path):
        config = joint_attack_scenario()
        path = tmp_path / "scenario.json"
        config.save(path)
        assert ScenarioConfig.load(path) == config

    def test_round_trip_with_disabled_clutter(self, tmp_path):
        config = ScenarioConfig(
            geometry=GEOM16, cnr_db=-math.inf, n_train_clutter=8, n_train_clear=8
        )
        path = tmp_path / "scenario.json"
        config.save(path)
        assert ScenarioConfig.load(path) == config
