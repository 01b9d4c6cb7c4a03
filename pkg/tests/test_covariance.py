"""Structured covariance estimators against closed-form and grid oracles."""

import math

import numpy as np
import pytest

from eccmsim.covariance import (
    DegenerateCovarianceError,
    estimate_clear_cov,
    estimate_clutter_cov,
    estimate_cut_cov,
    gram_eigensystem,
    hermitian_eigensystem,
)
from eccmsim.presets import nlj_scenario
from eccmsim.scenario import build_covariances, synthesize


def complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def loglik(cov, sample_gram, n_cols):
    """Gaussian log-likelihood of a data matrix given its Gram matrix."""
    n = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    assert sign.real > 0
    return float(
        -n_cols * n * math.log(math.pi)
        - n_cols * logdet.real
        - np.trace(np.linalg.solve(cov, sample_gram)).real
    )


class TestGramEigensystem:
    def test_reconstruction_and_order(self):
        rng = np.random.default_rng(3)
        for n, m in [(4, 9), (6, 3)]:
            data = complex_gaussian(rng, (n, m))
            eigen = gram_eigensystem(data)
            assert np.all(np.diff(eigen.values) <= 1e-12)
            np.testing.assert_allclose(
                eigen.vectors @ eigen.vectors.conj().T, np.eye(n), atol=1e-10
            )
            recon = (eigen.vectors * eigen.values) @ eigen.vectors.conj().T
            gram = data @ data.conj().T
            assert np.linalg.norm(recon - gram) <= 1e-9 * max(np.linalg.norm(gram), 1.0)

    def test_zero_padding_for_thin_data(self):
        rng = np.random.default_rng(4)
        data = complex_gaussian(rng, (5, 2))
        eigen = gram_eigensystem(data)
        np.testing.assert_allclose(eigen.values[2:], 0.0, atol=1e-12)


class TestEstimateClearCov:
    def test_isotropic_case(self):
        # Rows of a scaled unitary give a sample Gram equal to m * identity.
        n, m = 3, 8
        dft = np.exp(-2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m) / math.sqrt(m)
        train = math.sqrt(m) * dft[:n, :]
        est = estimate_clear_cov(train, rank=0)
        np.testing.assert_allclose(est.matrix, np.eye(n), atol=1e-10)
        assert est.noise_power == pytest.approx(1.0, rel=1e-10)

    def test_diagonal_case(self):
        m = 10
        train = np.zeros((3, m), dtype=complex)
        train[0, 0] = math.sqrt(4 * m)
        train[1, 1] = math.sqrt(m)
        train[2, 2] = math.sqrt(m)
        est = estimate_clear_cov(train, rank=1)
        np.testing.assert_allclose(est.matrix, np.diag([4.0, 1.0, 1.0]), atol=1e-10)
        assert est.noise_power == pytest.approx(1.0, rel=1e-12)

    def test_beats_grid_search(self):
        # Brute-force oracle over the rank-1-plus-scaled-identity family
        # sigma^2 I + lam u u^H with u = [cos t, sin t e^{j phi}].
        rng = np.random.default_rng(7)
        n, m = 2, 50
        train = complex_gaussian(rng, (n, m)) + 0.8 * np.outer(
            np.array([1.0, 1.0j]), complex_gaussian(rng, m)
        )
        est = estimate_clear_cov(train, rank=1)
        gram = train @ train.conj().T
        best = loglik(est.matrix, gram, m)

        lam_hat = est.eigen.values[0] - est.noise_power
        sigmas = est.noise_power * np.linspace(0.4, 1.8, 41)
        lams = lam_hat * np.linspace(0.4, 1.8, 41)
        ts = np.linspace(0.0, np.pi / 2, 37)
        phis = np.linspace(0.0, 2 * np.pi, 37, endpoint=False)
        tt, pp = np.meshgrid(ts, phis, indexing="ij")
        u0 = np.cos(tt).ravel()
        u1 = (np.sin(tt) * np.exp(1j * pp)).ravel()
        # u^H S u over the direction grid
        quad = (
            np.abs(u0) ** 2 * gram[0, 0].real
            + np.abs(u1) ** 2 * gram[1, 1].real
            + 2 * np.real(np.conj(u0) * u1 * gram[1, 0])
        )
        tr_s = np.trace(gram).real
        s2 = sigmas[:, None, None]
        lm = lams[None, :, None]
        qd = quad[None, None, :]
        ll_grid = (
            -m * n * math.log(math.pi)
            - m * np.log(s2 * (s2 + lm))
            - (tr_s - (lm / (s2 + lm)) * qd) / s2
        )
        assert best >= ll_grid.max() - 1e-9

    def test_trace_preservation_exact(self):
        rng = np.random.default_rng(11)
        train = complex_gaussian(rng, (6, 9))
        target = np.trace(train @ train.conj().T).real / 9
        for rank in range(6):
            est = estimate_clear_cov(train, rank)
            assert np.trace(est.matrix).real == pytest.approx(target, rel=1e-10)

    def test_commutes_with_sample_gram(self):
        rng = np.random.default_rng(12)
        train = complex_gaussian(rng, (5, 40))
        gram = train @ train.conj().T
        for rank in (0, 2, 4):
            est = estimate_clear_cov(train, rank)
            comm = est.matrix @ gram - gram @ est.matrix
            assert np.linalg.norm(comm) <= 1e-8 * np.linalg.norm(gram) * np.linalg.norm(est.matrix)

    def test_unitary_invariance(self):
        rng = np.random.default_rng(13)
        train = complex_gaussian(rng, (5, 20))
        q, _ = np.linalg.qr(complex_gaussian(rng, (5, 5)))
        for rank in (0, 1, 3):
            direct = estimate_clear_cov(q @ train, rank).matrix
            rotated = q @ estimate_clear_cov(train, rank).matrix @ q.conj().T
            np.testing.assert_allclose(direct, rotated, atol=1e-9)

    def test_rank_bounds_rejected(self):
        rng = np.random.default_rng(14)
        train = complex_gaussian(rng, (4, 6))
        with pytest.raises(ValueError):
            estimate_clear_cov(train, 4)
        with pytest.raises(ValueError):
            estimate_clear_cov(train, -1)

    def test_degenerate_noise_floor_raises(self):
        rng = np.random.default_rng(15)
        # Sample rank 2 <= requested rank, so the tail vanishes.
        train = complex_gaussian(rng, (4, 2))
        with pytest.raises(DegenerateCovarianceError):
            estimate_clear_cov(train, 2)
        with pytest.raises(DegenerateCovarianceError):
            estimate_clear_cov(train, 3)

    def test_loading_adds_to_spectrum(self):
        rng = np.random.default_rng(16)
        train = complex_gaussian(rng, (4, 12))
        plain = estimate_clear_cov(train, 1)
        loaded = estimate_clear_cov(train, 1, loading=0.5)
        np.testing.assert_allclose(
            loaded.matrix, plain.matrix + 0.5 * np.eye(4), atol=1e-10
        )


class TestEstimateClutterCov:
    def test_diagonal_whitened_case(self):
        k = 12
        train = np.zeros((2, k), dtype=complex)
        train[0, 0] = math.sqrt(5 * k)
        train[1, 1] = math.sqrt(0.5 * k)
        est = estimate_clutter_cov(train, np.eye(2, dtype=complex))
        np.testing.assert_allclose(est.matrix, np.diag([4.0, 0.0]), atol=1e-10)
        np.testing.assert_allclose(est.clutter_eigs, [4.0, 0.0], atol=1e-12)

    def test_matched_gram_gives_zero(self):
        rng = np.random.default_rng(21)
        base = complex_gaussian(rng, (3, 3))
        clear = base @ base.conj().T + 3 * np.eye(3)
        eigen = hermitian_eigensystem(clear)
        root = (eigen.vectors * np.sqrt(eigen.values)) @ eigen.vectors.conj().T
        k = 3
        train = math.sqrt(k) * root  # sample Gram is exactly k * clear
        est = estimate_clutter_cov(train, clear)
        np.testing.assert_allclose(est.matrix, 0.0, atol=1e-9)

    def test_beats_grid_search(self):
        # Oracle over all PSD 2x2 candidates B diag(a, b) B^H.
        rng = np.random.default_rng(22)
        n, k = 2, 40
        base = complex_gaussian(rng, (n, n))
        clear = base @ base.conj().T + np.eye(n)
        chol = np.linalg.cholesky(clear + 2.5 * np.outer([1, -1j], [1, 1j]).astype(complex))
        train = chol @ complex_gaussian(rng, (n, k))
        est = estimate_clutter_cov(train, clear)
        gram = train @ train.conj().T
        best = loglik(clear + est.matrix, gram, k)

        scale = max(est.clutter_eigs.max(), 1.0)
        avals = scale * np.linspace(0.0, 2.0, 25)
        bvals = scale * np.linspace(0.0, 2.0, 25)
        aa, bb = (x.ravel() for x in np.meshgrid(avals, bvals, indexing="ij"))
        ll_max = -np.inf
        for t in np.linspace(0.0, np.pi / 2, 17):
            for phi in np.linspace(0.0, 2 * np.pi, 17, endpoint=False):
                u = np.array([math.cos(t), math.sin(t) * np.exp(1j * phi)])
                w = np.array([-np.conj(u[1]), u[0]])  # orthonormal complement
                pu = np.outer(u, u.conj())
                pw = np.outer(w, w.conj())
                totals = (
                    clear[None, :, :]
                    + aa[:, None, None] * pu[None, :, :]
                    + bb[:, None, None] * pw[None, :, :]
                )
                dets = (
                    totals[:, 0, 0] * totals[:, 1, 1] - totals[:, 0, 1] * totals[:, 1, 0]
                ).real
                # trace(inv(T) @ gram) via the 2x2 adjugate
                tr_inv_gram = (
                    totals[:, 1, 1] * gram[0, 0]
                    - totals[:, 0, 1] * gram[1, 0]
                    - totals[:, 1, 0] * gram[0, 1]
                    + totals[:, 0, 0] * gram[1, 1]
                ).real / dets
                ll = -k * n * math.log(math.pi) - k * np.log(dets) - tr_inv_gram
                ll_max = max(ll_max, float(ll.max()))
        assert best >= ll_max - 1e-9

    def test_psd_and_monotone_in_scaling(self):
        rng = np.random.default_rng(23)
        clear = np.eye(3, dtype=complex) * 2.0
        train = complex_gaussian(rng, (3, 10)) * 2.0
        small = estimate_clutter_cov(train, clear)
        big = estimate_clutter_cov(1.7 * train, clear)
        assert np.all(np.linalg.eigvalsh(small.matrix) >= -1e-10)
        assert np.all(big.clutter_eigs >= small.clutter_eigs - 1e-12)

    def test_singular_clear_cov_rejected(self):
        rng = np.random.default_rng(24)
        train = complex_gaussian(rng, (3, 5))
        singular = np.diag([1.0, 1.0, 0.0]).astype(complex)
        with pytest.raises(ValueError):
            estimate_clutter_cov(train, singular)


class TestEstimateCutCov:
    def test_runs_with_fewer_clear_samples_than_elements(self):
        # Only n_train_clear > rank is needed, not > n_elements.
        config = nlj_scenario(n_train_clutter=20, n_train_clear=4)
        cov = build_covariances(config)
        data = synthesize(config, cov, 0.0, "H00", 33)
        estimate = estimate_cut_cov(data.train_clutter, data.train_clear, rank=3)
        np.linalg.cholesky(estimate)

    def test_beats_sample_covariance_in_frobenius(self):
        # Monte Carlo comparison oracle on the three-jammer scenario.
        config = nlj_scenario(20, 20)
        cov = build_covariances(config)
        truth = cov.cut_cov
        scale = np.linalg.norm(truth)
        err_structured = []
        err_scm = []
        for trial in range(200):
            data = synthesize(config, cov, 0.0, "H00", 1000 + trial)
            estimate = estimate_cut_cov(data.train_clutter, data.train_clear, rank=3)
            scm = data.train_clutter @ data.train_clutter.conj().T / 20
            err_structured.append(np.linalg.norm(estimate - truth) / scale)
            err_scm.append(np.linalg.norm(scm - truth) / scale)
        assert np.mean(err_structured) < np.mean(err_scm)

    def test_zero_clutter_estimate_returns_clear(self):
        rng = np.random.default_rng(31)
        n, m = 4, 30
        train_clear = complex_gaussian(rng, (n, m))
        clear = estimate_clear_cov(train_clear, rank=1)
        eigen = hermitian_eigensystem(clear.matrix)
        root = (eigen.vectors * np.sqrt(eigen.values)) @ eigen.vectors.conj().T
        train_clutter = math.sqrt(n) * root  # Gram = k * clear estimate
        estimate = estimate_cut_cov(train_clutter, train_clear, rank=1)
        np.testing.assert_allclose(estimate, clear.matrix, atol=1e-9)
