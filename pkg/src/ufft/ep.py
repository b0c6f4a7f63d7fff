"""Expectation propagation for non-Gaussian local factors on the DFT.

Each complex component carries a true local factor (discrete pmf, Gaussian
mixture, or fixed Gaussian) approximated by a canonical Gaussian site
(gamma, lambda). One EP round refreshes all 2N sites from the current
beliefs (moment matching through the tilted distribution, damped by beta)
and then reruns Gaussian inference with the new sites: the dense exact
posterior for ep_dft, GaBP on the butterfly graph for ep_fft.

Round bootstrap: sites start at exact zeros, the initial beliefs are flat
(V_large covariance), so the first update installs (damped) standalone
local moments and inference then produces the first informed beliefs.
FixedGaussian locals are their own EP fixed point (the update candidate is
canonical(local) regardless of the belief), so the engine installs them
undamped at round 1 and never revisits them.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateTilt, NotPositiveDefinite
from .exact import DiagonalSiteSet, exact_posterior, marginal_arrays, posterior_mean
from .gaussian import CanonGauss2, MomentGauss2, underline_vec
from .graph import Schedule, V_LARGE, build_graph, run_gabp
from .linalg2 import clip_eigvals2, det2, inv2, is_pd2, matvec2, sym2

TILT_VAR_FLOOR = 1e-6


class DiscretePmf:
    """Discrete local factor over complex support points."""

    def __init__(self, support, log_weights):
        self.support = np.atleast_1d(np.asarray(support, dtype=complex))
        self.log_weights = np.atleast_1d(np.asarray(log_weights, dtype=float))
        if self.support.shape != self.log_weights.shape:
            raise ValueError("support and log_weights must have equal length")
        self.log_weights = self.log_weights - logsumexp(self.log_weights)

    @classmethod
    def bpsk(cls, p_plus=0.5):
        p_plus = min(max(p_plus, 1e-300), 1.0 - 1e-16)
        return cls([1.0 + 0j, -1.0 + 0j], np.log([p_plus, 1.0 - p_plus]))

    @classmethod
    def point_mass(cls, value):
        return cls([value], [0.0])


class GaussMix:
    """Gaussian-mixture local factor (weights, 2-dim component moments)."""

    def __init__(self, weights, means, covs):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.covs = np.asarray(covs, dtype=float)
        if not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("mixture weights must sum to 1")


class FixedGaussian:
    """Gaussian local factor; EP is exact for these."""

    def __init__(self, gauss):
        self.gauss = gauss


@dataclass(frozen=True)
class SiteParams:
    info: np.ndarray  # (2,)
    prec: np.ndarray  # (2, 2)

    @classmethod
    def zero(cls):
        return cls(np.zeros(2), np.zeros((2, 2)))


@dataclass
class EpConfig:
    L: int = 4
    beta: float = 0.5
    schedule: Schedule = Schedule.FLOODING
    warm_start: bool = True
    tau_conv: float = 1e-5
    max_layered_iters: int = 50
    v_large: float = V_LARGE
    tilt_var_floor: float = TILT_VAR_FLOOR
    # Speed knob for decision-only use: skip the covariance pass in the
    # final ep_dft round (returned covariances are then one round stale).
    final_round_mean_only: bool = False


# --- tilted moments (batched cores + single-site wrapper) -------------------

def _tilted_pmf(pts, logw, gamma, lam):
    """Weighted empirical moments of pmf x cavity. pts: (G, K, 2)."""
    t1 = np.einsum("gi,gki->gk", gamma, pts)
    t2 = 0.5 * np.einsum("gki,gij,gkj->gk", pts, lam, pts)
    lw = logw + t1 - t2
    norm = logsumexp(lw, axis=1, keepdims=True)
    bad = ~np.isfinite(norm[:, 0])
    w = np.exp(lw - np.where(np.isfinite(norm), norm, 0.0))
    mean = np.einsum("gk,gki->gi", w, pts)
    dev = pts - mean[:, None, :]
    cov = np.einsum("gk,gki,gkj->gij", w, dev, dev)
    return mean, cov, bad


def _tilted_gm(logw, mu, comp_prec, logdet_cov, gamma, lam):
    """Responsibility-weighted moments of GM x cavity.

    comp_prec are the component precisions Sigma_k^-1; the per-component
    fused precision P_k = lam_cav + Sigma_k^-1 must be PD.
    """
    P = lam[:, None, :, :] + comp_prec
    ok = is_pd2(P)
    bad = ~ok.all(axis=1)
    Psafe = np.where(ok[..., None, None], P, np.eye(2))
    Pinv = inv2(Psafe)
    b = gamma[:, None, :] + np.einsum("gkij,gkj->gki", comp_prec, mu)
    mk = np.einsum("gkij,gkj->gki", Pinv, b)
    quad = 0.5 * np.einsum("gki,gki->gk", b, mk)
    quad0 = 0.5 * np.einsum("gki,gkij,gkj->gk", mu, comp_prec, mu)
    logr = logw - 0.5 * logdet_cov - 0.5 * np.log(np.abs(det2(Psafe))) + quad - quad0
    logr = np.where(ok, logr, -np.inf)
    norm = logsumexp(logr, axis=1, keepdims=True)
    bad |= ~np.isfinite(norm[:, 0])
    r = np.exp(logr - np.where(np.isfinite(norm), norm, 0.0))
    mean = np.einsum("gk,gki->gi", r, mk)
    second = Pinv + np.einsum("gki,gkj->gkij", mk, mk)
    cov = np.einsum("gk,gkij->gij", r, second) - np.einsum("gi,gj->gij", mean, mean)
    return mean, sym2(cov), bad


def tilted_moments(local, cavity):
    """Moments of the tilted distribution local(x) * N_can(x; cavity)."""
    gamma = cavity.info[None]
    lam = sym2(cavity.prec)[None]
    if isinstance(local, DiscretePmf):
        pts = underline_vec(local.support).reshape(1, -1, 2)
        mean, cov, bad = _tilted_pmf(pts, local.log_weights[None], gamma, lam)
    elif isinstance(local, GaussMix):
        covs = sym2(local.covs)[None]
        comp_prec = inv2(covs)
        logdet = np.log(det2(covs))
        mean, cov, bad = _tilted_gm(
            np.log(np.maximum(local.weights, 1e-300))[None],
            local.means[None], comp_prec, logdet, gamma, lam,
        )
    elif isinstance(local, FixedGaussian):
        prec_l = inv2(sym2(local.gauss.cov))
        P = sym2(lam[0] + prec_l)
        if not is_pd2(P):
            raise DegenerateTilt("fixed-Gaussian fusion is improper")
        cov1 = sym2(inv2(P))
        mean1 = cov1 @ (gamma[0] + prec_l @ local.gauss.mean)
        return MomentGauss2(mean1, cov1)
    else:
        raise TypeError(f"unknown local distribution {type(local).__name__}")
    if bad[0]:
        raise DegenerateTilt("tilted weights underflowed or a fusion is improper")
    return MomentGauss2(mean[0], sym2(cov)[0])


def ep_site_update(local, belief, old, beta, tilt_var_floor=TILT_VAR_FLOOR):
    """One Alg.-1 style site refresh: cavity, tilted moments, damped update.

    The candidate precision is validated; an invalid candidate reverts both
    gamma and lambda to the old values before damping.
    """
    cov_b = sym2(np.asarray(belief.cov, dtype=float))
    if not is_pd2(cov_b):
        raise NotPositiveDefinite("belief covariance must be PD")
    prec_b = sym2(inv2(cov_b))
    info_b = prec_b @ np.asarray(belief.mean, dtype=float)
    cavity = CanonGauss2(info_b - old.info, prec_b - old.prec)
    tilted = tilted_moments(local, cavity)
    cov_t = clip_eigvals2(tilted.cov, tilt_var_floor)
    prec_t = sym2(inv2(cov_t))
    lam_c = sym2(prec_t - cavity.prec)
    gam_c = prec_t @ tilted.mean - cavity.info
    if not is_pd2(lam_c):
        gam_c, lam_c = old.info, old.prec
    return SiteParams(
        info=beta * gam_c + (1.0 - beta) * old.info,
        prec=sym2(beta * lam_c + (1.0 - beta) * old.prec),
    )


# --- batched engine ----------------------------------------------------------

class _SiteGroup:
    """Sites of one domain sharing a local-factor type, packed for batching."""

    def __init__(self, kind, idx, payload):
        self.kind = kind  # "pmf" | "gm"
        self.idx = idx
        self.payload = payload


def _pack_locals(locals_):
    """Split a list of locals into fixed sites and batched update groups."""
    fixed_idx, fixed_mean, fixed_cov = [], [], []
    pmf_idx, pmf_pts, pmf_logw = [], [], []
    gm = {}
    for n, loc in enumerate(locals_):
        if isinstance(loc, FixedGaussian):
            fixed_idx.append(n)
            fixed_mean.append(np.asarray(loc.gauss.mean, dtype=float))
            fixed_cov.append(sym2(np.asarray(loc.gauss.cov, dtype=float)))
        elif isinstance(loc, DiscretePmf):
            pmf_idx.append(n)
            pmf_pts.append(underline_vec(loc.support).reshape(-1, 2))
            pmf_logw.append(loc.log_weights)
        elif isinstance(loc, GaussMix):
            gm.setdefault(len(loc.weights), []).append(n)
        else:
            raise TypeError(f"unknown local distribution {type(loc).__name__}")
    groups = []
    if pmf_idx:
        kmax = max(p.shape[0] for p in pmf_pts)
        pts = np.zeros((len(pmf_idx), kmax, 2))
        logw = np.full((len(pmf_idx), kmax), -np.inf)
        for g, (p, lw) in enumerate(zip(pmf_pts, pmf_logw)):
            pts[g, : p.shape[0]] = p
            logw[g, : lw.shape[0]] = lw
        groups.append(_SiteGroup("pmf", np.array(pmf_idx), (pts, logw)))
    for k, idx in gm.items():
        w = np.stack([np.log(np.maximum(locals_[n].weights, 1e-300)) for n in idx])
        mu = np.stack([locals_[n].means for n in idx])
        covs = sym2(np.stack([locals_[n].covs for n in idx]))
        comp_prec = inv2(covs)
        logdet = np.log(det2(covs))
        groups.append(_SiteGroup("gm", np.array(idx), (w, mu, comp_prec, logdet)))
    fixed = None
    if fixed_idx:
        fixed = (np.array(fixed_idx), np.stack(fixed_mean), np.stack(fixed_cov))
    return fixed, groups


def _update_groups(groups, bel_mean, bel_cov, info, prec, beta, floor):
    """Damped EP refresh of all grouped sites in one domain. Returns the
    number of degenerate-tilt skips."""
    skipped = 0
    for grp in groups:
        idx = grp.idx
        cov_b = sym2(bel_cov[idx])
        if not np.all(is_pd2(cov_b)):
            raise NotPositiveDefinite("belief covariance must be PD")
        prec_b = sym2(inv2(cov_b))
        info_b = matvec2(prec_b, bel_mean[idx])
        lam_cav = sym2(prec_b - prec[idx])
        gam_cav = info_b - info[idx]
        if grp.kind == "pmf":
            pts, logw = grp.payload
            mean_t, cov_t, bad = _tilted_pmf(pts, logw, gam_cav, lam_cav)
        else:
            logw, mu, comp_prec, logdet = grp.payload
            mean_t, cov_t, bad = _tilted_gm(logw, mu, comp_prec, logdet, gam_cav, lam_cav)
        cov_t = clip_eigvals2(cov_t, floor)
        prec_t = sym2(inv2(cov_t))
        lam_c = sym2(prec_t - lam_cav)
        gam_c = matvec2(prec_t, mean_t) - gam_cav
        revert = ~is_pd2(lam_c) | bad
        lam_c = np.where(revert[:, None, None], prec[idx], lam_c)
        gam_c = np.where(revert[:, None], info[idx], gam_c)
        info[idx] = beta * gam_c + (1.0 - beta) * info[idx]
        prec[idx] = sym2(beta * lam_c + (1.0 - beta) * prec[idx])
        skipped += int(np.count_nonzero(bad))
    return skipped


@dataclass
class EpResult:
    time_mean: np.ndarray
    time_cov: np.ndarray
    freq_mean: np.ndarray
    freq_cov: np.ndarray
    reports: list = field(default_factory=list)
    degenerate_skips: int = 0

    @property
    def time_beliefs(self):
        return [MomentGauss2(m, c) for m, c in zip(self.time_mean, self.time_cov)]

    @property
    def freq_beliefs(self):
        return [MomentGauss2(m, c) for m, c in zip(self.freq_mean, self.freq_cov)]


def _run_ep(time_locals, freq_locals, cfg, use_graph):
    N = len(time_locals)
    if len(freq_locals) != N:
        raise ValueError("domain local lists must have equal length")
    t_fixed, t_groups = _pack_locals(time_locals)
    f_fixed, f_groups = _pack_locals(freq_locals)

    t_info, t_prec = np.zeros((N, 2)), np.zeros((N, 2, 2))
    f_info, f_prec = np.zeros((N, 2)), np.zeros((N, 2, 2))
    # Fixed-Gaussian locals are installed once, undamped (their EP fixed point).
    for fixed, info, prec in ((t_fixed, t_info, t_prec), (f_fixed, f_info, f_prec)):
        if fixed is not None:
            idx, mean, cov = fixed
            prec[idx] = sym2(inv2(cov))
            info[idx] = matvec2(prec[idx], mean)

    flat_cov = cfg.v_large * np.eye(2)
    tb_mean, tb_cov = np.zeros((N, 2)), np.tile(flat_cov, (N, 1, 1))
    fb_mean, fb_cov = np.zeros((N, 2)), np.tile(flat_cov, (N, 1, 1))

    graph = build_graph(N) if use_graph else None
    state = None
    reports = []
    skips = 0
    for rnd in range(1, cfg.L + 1):
        skips += _update_groups(t_groups, tb_mean, tb_cov, t_info, t_prec,
                                cfg.beta, cfg.tilt_var_floor)
        skips += _update_groups(f_groups, fb_mean, fb_cov, f_info, f_prec,
                                cfg.beta, cfg.tilt_var_floor)
        t_sites = DiagonalSiteSet("time", t_info, t_prec)
        f_sites = DiagonalSiteSet("frequency", f_info, f_prec)
        if use_graph:
            res = run_gabp(
                graph, t_sites, f_sites, cfg.schedule, cfg.max_layered_iters,
                cfg.tau_conv, cfg.v_large, state=state if cfg.warm_start else None,
            )
            state = res.state
            tb_mean, tb_cov = res.time_mean, res.time_cov
            fb_mean, fb_cov = res.freq_mean, res.freq_cov
            reports.append(res.report)
        else:
            mean_only = cfg.final_round_mean_only and rnd == cfg.L
            need_freq = bool(f_groups) or rnd == cfg.L
            if mean_only:
                mt, mf = posterior_mean(t_sites, f_sites)
                tb_mean = mt.reshape(-1, 2)
                fb_mean = mf.reshape(-1, 2)
            else:
                gt, gf = exact_posterior(t_sites, f_sites)
                tb_mean, tb_cov = marginal_arrays(gt)
                if need_freq:
                    fb_mean, fb_cov = marginal_arrays(gf)
            reports.append(None)
    return EpResult(tb_mean, tb_cov, fb_mean, fb_cov, reports, skips)


def ep_fft(time_locals, freq_locals, cfg=None):
    """EP with GaBP on the FFT butterfly graph as the inner Gaussian solver."""
    return _run_ep(time_locals, freq_locals, cfg or EpConfig(), use_graph=True)


def ep_dft(time_locals, freq_locals, cfg=None):
    """EP with the dense exact posterior as the inner Gaussian solver."""
    return _run_ep(time_locals, freq_locals, cfg or EpConfig(), use_graph=False)
