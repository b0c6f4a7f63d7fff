"""Tests for the EP site updates and the EP-DFT / EP-FFT outer loops."""
import numpy as np
import pytest

from ufft.ep import (
    DiscretePmf, EpConfig, FixedGaussian, GaussMix, SiteParams, _update_groups,
    _pack_locals, ep_dft, ep_fft, ep_site_update, tilted_moments,
)
from ufft.errors import DegenerateTilt, NotPositiveDefinite
from ufft.exact import DiagonalSiteSet, exact_posterior, marginal_arrays
from ufft.gaussian import CanonGauss2, MomentGauss2, moment_to_canon


def flat_cavity():
    return CanonGauss2(np.zeros(2), np.zeros((2, 2)))


def grid_moments(logpdf, lim=8.0, n=1201):
    """2-dim numerical integration oracle for tilted moments."""
    ax = np.linspace(-lim, lim, n)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    w = np.exp(logpdf(pts) - np.max(logpdf(pts)))
    w = w / w.sum()
    mean = w @ pts
    dev = pts - mean
    cov = (w[:, None] * dev).T @ dev
    return mean, cov


class TestDiscretePmf:
    def test_normalization(self):
        pmf = DiscretePmf([1, -1], [2.0, 2.0])
        assert np.allclose(np.exp(pmf.log_weights).sum(), 1.0)

    def test_bpsk(self):
        pmf = DiscretePmf.bpsk(0.75)
        assert np.allclose(np.exp(pmf.log_weights), [0.75, 0.25])

    def test_point_mass(self):
        pmf = DiscretePmf.point_mass(0.0)
        assert pmf.support.shape == (1,)
        assert np.allclose(pmf.log_weights, [0.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            DiscretePmf([1, -1], [0.0])


def test_gaussmix_weight_validation():
    with pytest.raises(ValueError):
        GaussMix([0.5, 0.2], np.zeros((2, 2)), np.stack([np.eye(2)] * 2))


class TestTiltedMoments:
    def test_bpsk_flat_cavity(self):
        g = tilted_moments(DiscretePmf.bpsk(0.5), flat_cavity())
        assert np.allclose(g.mean, [0.0, 0.0])
        assert np.allclose(g.cov, [[1.0, 0.0], [0.0, 0.0]])

    def test_bpsk_informative_cavity(self):
        cav = CanonGauss2(np.array([0.5, 0.0]), np.eye(2))
        g = tilted_moments(DiscretePmf.bpsk(0.5), cav)
        m = np.tanh(0.5)
        assert np.allclose(g.mean, [m, 0.0], atol=1e-12)
        assert np.allclose(g.cov, [[1.0 - m * m, 0.0], [0.0, 0.0]], atol=1e-12)
        assert np.isclose(m, 0.46212, atol=1e-5)
        assert np.isclose(1.0 - m * m, 0.78644, atol=1e-5)

    def test_pmf_against_direct_sum(self):
        # Independent direct computation over a 4-point support.
        rng = np.random.default_rng(0)
        support = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        logw = np.log(rng.dirichlet(np.ones(4)))
        a = rng.standard_normal((2, 2))
        lam = a @ a.T + 0.5 * np.eye(2)
        gam = rng.standard_normal(2)
        g = tilted_moments(DiscretePmf(support, logw), CanonGauss2(gam, lam))
        pts = np.stack([support.real, support.imag], axis=1)
        w = np.exp(logw) * np.exp(pts @ gam - 0.5 * np.einsum("ki,ij,kj->k", pts, lam, pts))
        w = w / w.sum()
        mean = w @ pts
        dev = pts - mean
        cov = (w[:, None] * dev).T @ dev
        assert np.allclose(g.mean, mean, atol=1e-12)
        assert np.allclose(g.cov, cov, atol=1e-12)

    def test_gaussmix_sparse_prior_flat_cavity(self):
        gm = GaussMix(
            [0.01, 0.99],
            np.zeros((2, 2)),
            np.stack([np.eye(2), 0.01 * np.eye(2)]),
        )
        g = tilted_moments(gm, flat_cavity())
        assert np.allclose(g.mean, [0.0, 0.0], atol=1e-12)
        assert np.allclose(g.cov, 0.0199 * np.eye(2), atol=1e-12)

    def test_gaussmix_against_grid_integration(self):
        rng = np.random.default_rng(1)
        means = rng.standard_normal((2, 2))
        covs = np.stack([np.eye(2) * 0.8, np.eye(2) * 1.5])
        gm = GaussMix([0.3, 0.7], means, covs)
        gam = np.array([0.4, -0.2])
        lam = np.array([[0.9, 0.1], [0.1, 0.7]])
        g = tilted_moments(gm, CanonGauss2(gam, lam))

        def logpdf(pts):
            comps = []
            for w, mu, cov in zip(gm.weights, means, covs):
                d = pts - mu
                p = np.linalg.inv(cov)
                comps.append(
                    np.log(w)
                    - 0.5 * np.log(np.linalg.det(2 * np.pi * cov))
                    - 0.5 * np.einsum("ki,ij,kj->k", d, p, d)
                )
            mix = np.logaddexp(*comps)
            tilt = pts @ gam - 0.5 * np.einsum("ki,ij,kj->k", pts, lam, pts)
            return mix + tilt

        mean, cov = grid_moments(logpdf)
        assert np.allclose(g.mean, mean, atol=1e-4)
        assert np.allclose(g.cov, cov, atol=1e-4)

    def test_fixed_gaussian_is_canonical_product(self):
        loc = FixedGaussian(MomentGauss2(np.array([1.0, -1.0]), 2.0 * np.eye(2)))
        cav = CanonGauss2(np.array([0.5, 0.5]), 0.5 * np.eye(2))
        g = tilted_moments(loc, cav)
        prec = 0.5 * np.eye(2) + 0.5 * np.eye(2)
        info = np.array([0.5, 0.5]) + 0.5 * np.array([1.0, -1.0])
        assert np.allclose(g.cov, np.linalg.inv(prec), atol=1e-12)
        assert np.allclose(g.mean, np.linalg.solve(prec, info), atol=1e-12)

    def test_degenerate_gaussmix_fusion(self):
        gm = GaussMix([1.0], np.zeros((1, 2)), np.stack([np.eye(2)]))
        cav = CanonGauss2(np.zeros(2), -2.0 * np.eye(2))
        with pytest.raises(DegenerateTilt):
            tilted_moments(gm, cav)

    def test_unknown_local_type(self):
        with pytest.raises(TypeError):
            tilted_moments(object(), flat_cavity())


class TestEpSiteUpdate:
    def test_fixed_gaussian_half_damping(self):
        g = MomentGauss2(np.array([0.5, -1.5]), np.array([[1.2, 0.2], [0.2, 0.9]]))
        site = ep_site_update(FixedGaussian(g), g, SiteParams.zero(), beta=0.5)
        canon = moment_to_canon(g)
        assert np.allclose(site.info, 0.5 * canon.info, atol=1e-10)
        assert np.allclose(site.prec, 0.5 * canon.prec, atol=1e-10)

    def test_fixed_gaussian_fixed_point(self):
        g = MomentGauss2(np.array([0.5, -1.5]), np.array([[1.2, 0.2], [0.2, 0.9]]))
        rng = np.random.default_rng(2)
        a = rng.standard_normal((2, 2))
        belief = MomentGauss2(rng.standard_normal(2), a @ a.T + 0.5 * np.eye(2))
        site = ep_site_update(FixedGaussian(g), belief, SiteParams.zero(), beta=1.0)
        canon = moment_to_canon(g)
        assert np.allclose(site.info, canon.info, atol=1e-9)
        assert np.allclose(site.prec, canon.prec, atol=1e-9)

    def test_revert_branch_returns_old_exactly(self):
        # A nearly deterministic belief makes the cavity precision dominate
        # the floored tilted precision, so the candidate is rejected.
        belief = MomentGauss2(np.array([0.9, 0.0]), 1e-8 * np.eye(2))
        old = SiteParams(np.array([0.1, 0.2]), 0.5 * np.eye(2))
        site = ep_site_update(DiscretePmf.bpsk(0.5), belief, old, beta=0.5)
        assert np.array_equal(site.info, old.info)
        assert np.array_equal(site.prec, old.prec)

    def test_rejects_improper_belief(self):
        belief = MomentGauss2(np.zeros(2), np.diag([1.0, -1.0]))
        with pytest.raises(NotPositiveDefinite):
            ep_site_update(DiscretePmf.bpsk(0.5), belief, SiteParams.zero(), 0.5)


class TestBatchedUpdates:
    def test_groups_match_single_site_updates(self):
        # The packed, vectorized refresh must agree with looping the scalar
        # update over every site.
        rng = np.random.default_rng(3)
        locals_ = [
            DiscretePmf.bpsk(0.3),
            DiscretePmf.point_mass(0.0),
            GaussMix([0.2, 0.8], rng.standard_normal((2, 2)),
                     np.stack([np.eye(2), 0.5 * np.eye(2)])),
            DiscretePmf([1 + 1j, -1 - 1j, 1j], np.log([0.2, 0.3, 0.5])),
        ]
        n = len(locals_)
        bel_mean = 0.3 * rng.standard_normal((n, 2))
        bel_cov = np.tile(1.5 * np.eye(2), (n, 1, 1))
        info = 0.05 * rng.standard_normal((n, 2))
        prec = np.tile(0.1 * np.eye(2), (n, 1, 1))
        info_b, prec_b = info.copy(), prec.copy()
        _, groups = _pack_locals(locals_)
        _update_groups(groups, bel_mean, bel_cov, info_b, prec_b, 0.5, 1e-6)
        for i, loc in enumerate(locals_):
            site = ep_site_update(
                loc, MomentGauss2(bel_mean[i], bel_cov[i]),
                SiteParams(info[i], prec[i]), 0.5,
            )
            assert np.allclose(info_b[i], site.info, atol=1e-10)
            assert np.allclose(prec_b[i], site.prec, atol=1e-10)


def gaussian_locals(N, rng):
    tl, fl = [], []
    for _ in range(N):
        a = rng.standard_normal((2, 2))
        tl.append(FixedGaussian(MomentGauss2(rng.standard_normal(2), a @ a.T + 0.4 * np.eye(2))))
        b = rng.standard_normal((2, 2))
        fl.append(FixedGaussian(MomentGauss2(rng.standard_normal(2), b @ b.T + 0.4 * np.eye(2))))
    return tl, fl


def sites_of(locals_, domain):
    means = np.stack([loc.gauss.mean for loc in locals_])
    covs = np.stack([loc.gauss.cov for loc in locals_])
    return DiagonalSiteSet.from_mean_cov(means, covs, domain)


class TestEpLoops:
    def test_ep_dft_gaussian_round_one_exact(self):
        rng = np.random.default_rng(4)
        tl, fl = gaussian_locals(8, rng)
        res = ep_dft(tl, fl, EpConfig(L=1))
        gt, gf = exact_posterior(sites_of(tl, "time"), sites_of(fl, "frequency"))
        mt, ct = marginal_arrays(gt)
        mf, cf = marginal_arrays(gf)
        assert np.allclose(res.time_mean, mt, atol=1e-12)
        assert np.allclose(res.time_cov, ct, atol=1e-12)
        assert np.allclose(res.freq_mean, mf, atol=1e-12)
        assert np.allclose(res.freq_cov, cf, atol=1e-12)

    def test_gaussian_reduction_fft_vs_dft(self):
        rng = np.random.default_rng(5)
        tl, fl = gaussian_locals(8, rng)
        r_fft = ep_fft(tl, fl, EpConfig(L=1, tau_conv=1e-9))
        r_dft = ep_dft(tl, fl, EpConfig(L=1))
        assert np.allclose(r_fft.time_mean, r_dft.time_mean, atol=1e-6)
        assert np.allclose(r_fft.freq_mean, r_dft.freq_mean, atol=1e-6)

    def test_ep_dft_matches_scalar_reference(self):
        # Independent scalar reimplementation of the outer loop: one
        # ep_site_update per site, exact_posterior for the inner inference.
        rng = np.random.default_rng(9)
        N = 8
        tl = [DiscretePmf.bpsk(0.5)] * (N // 2) + [DiscretePmf.point_mass(0.0)] * (N // 2)
        fl = [FixedGaussian(MomentGauss2(0.7 * rng.standard_normal(2), 1.5 * np.eye(2)))
              for _ in range(N)]
        cfg = EpConfig(L=5, beta=0.5)
        res = ep_dft(tl, fl, cfg)

        sites_t = [SiteParams.zero() for _ in range(N)]
        f_prec = np.stack([np.linalg.inv(loc.gauss.cov) for loc in fl])
        f_info = np.einsum("nij,nj->ni", f_prec, np.stack([loc.gauss.mean for loc in fl]))
        fsites = DiagonalSiteSet("frequency", f_info, f_prec)
        tb_mean = np.zeros((N, 2))
        tb_cov = np.tile(cfg.v_large * np.eye(2), (N, 1, 1))
        for _ in range(cfg.L):
            sites_t = [
                ep_site_update(tl[n], MomentGauss2(tb_mean[n], tb_cov[n]),
                               sites_t[n], cfg.beta, cfg.tilt_var_floor)
                for n in range(N)
            ]
            tsites = DiagonalSiteSet(
                "time",
                np.stack([s.info for s in sites_t]),
                np.stack([s.prec for s in sites_t]),
            )
            gt, gf = exact_posterior(tsites, fsites)
            tb_mean, tb_cov = marginal_arrays(gt)
            fb_mean, fb_cov = marginal_arrays(gf)
        assert np.allclose(res.time_mean, tb_mean, atol=1e-9)
        assert np.allclose(res.time_cov, tb_cov, atol=1e-9)
        assert np.allclose(res.freq_mean, fb_mean, atol=1e-9)
        assert np.allclose(res.freq_cov, fb_cov, atol=1e-9)

    def test_final_round_mean_only_matches_means(self):
        rng = np.random.default_rng(6)
        tl = [DiscretePmf.bpsk(0.5)] * 4
        fl = [FixedGaussian(MomentGauss2(rng.standard_normal(2), 2.0 * np.eye(2)))
              for _ in range(4)]
        full = ep_dft(tl, fl, EpConfig(L=3))
        lean = ep_dft(tl, fl, EpConfig(L=3, final_round_mean_only=True))
        assert np.allclose(full.time_mean, lean.time_mean, atol=1e-12)
        assert np.allclose(full.freq_mean, lean.freq_mean, atol=1e-12)

    def test_warm_start_toggle_consistent(self):
        rng = np.random.default_rng(7)
        tl = [DiscretePmf.bpsk(0.5)] * 8
        fl = [FixedGaussian(MomentGauss2(rng.standard_normal(2), np.eye(2)))
              for _ in range(8)]
        warm = ep_fft(tl, fl, EpConfig(L=3, warm_start=True))
        cold = ep_fft(tl, fl, EpConfig(L=3, warm_start=False))
        assert np.allclose(warm.time_mean, cold.time_mean, atol=1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ep_dft([DiscretePmf.bpsk()] * 4, [DiscretePmf.bpsk()] * 2, EpConfig(L=1))

    def test_beliefs_properties(self):
        rng = np.random.default_rng(8)
        tl, fl = gaussian_locals(4, rng)
        res = ep_dft(tl, fl, EpConfig(L=1))
        assert len(res.time_beliefs) == 4
        assert np.allclose(res.time_beliefs[1].mean, res.time_mean[1])
