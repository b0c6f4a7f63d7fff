"""Signal models, samplers and baseline estimators for the experiments.

Covers the three studies: random trial distributions for the GaBP analysis,
BPSK transmission over an ISI channel with frequency-domain likelihoods and
ZF / LMMSE / Viterbi baselines, and sparse radar channel estimation from
LLR-weighted observations.

Conventions: sigma2 is always a per-real-dimension noise variance and
sign(0) := +1. Randomness comes from counter-based Philox generators with
per-trial substreams, so trials are reproducible and order-independent.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockTooLarge, LengthMismatch, StateSpaceTooLarge, ZeroFrequencyResponse
from .exact import DiagonalSiteSet
from .gaussian import underline_vec

ISI_TAPS = np.array([0.04, -0.05, 0.07, -0.21, -0.5, 0.72, 0.36, 0.0, 0.21, 0.03, 0.07])


def philox(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def trial_rng(seed, trial):
    """Independent substream for one trial (jump-ahead, not reseeding)."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(trial))


# --- V-A: trial-distribution sampler ----------------------------------------

@dataclass
class TrialPair:
    """Random proper site pairs for the GaBP accuracy/iteration study."""

    N: int
    time_means: np.ndarray  # (N, 2)
    time_covs: np.ndarray  # (N, 2, 2), diagonal
    freq_means: np.ndarray
    freq_covs: np.ndarray

    def time_sites(self):
        return DiagonalSiteSet.from_mean_cov(self.time_means, self.time_covs, "time")

    def freq_sites(self):
        return DiagonalSiteSet.from_mean_cov(self.freq_means, self.freq_covs, "frequency")


def sample_trial_pair(N, rng):
    """Per-component diagonal covariances U[0,1] (time) and U[0,N] (freq);
    frequency means Gaussian under their covariance, time means a noisy
    inverse DFT of the frequency mean vector (noise covariance of component
    n taken from the frequency-domain component n)."""
    freq_covs = np.zeros((N, 2, 2))
    freq_covs[:, 0, 0] = rng.uniform(0.0, N, size=N)
    freq_covs[:, 1, 1] = rng.uniform(0.0, N, size=N)
    time_covs = np.zeros((N, 2, 2))
    time_covs[:, 0, 0] = rng.uniform(0.0, 1.0, size=N)
    time_covs[:, 1, 1] = rng.uniform(0.0, 1.0, size=N)
    freq_means = rng.standard_normal((N, 2)) * np.sqrt(
        np.stack([freq_covs[:, 0, 0], freq_covs[:, 1, 1]], axis=1)
    )
    mu_f = freq_means[:, 0] + 1j * freq_means[:, 1]
    mu_t = np.fft.ifft(mu_f)
    noise = rng.standard_normal((N, 2)) * np.sqrt(
        np.stack([freq_covs[:, 0, 0], freq_covs[:, 1, 1]], axis=1)
    )
    time_means = np.stack([mu_t.real, mu_t.imag], axis=1) + noise
    return TrialPair(N, time_means, time_covs, freq_means, freq_covs)


# --- V-B: ISI channel ---------------------------------------------------------

def _next_pow2(n):
    p = 1
    while p < n:
        p <<= 1
    return p


@dataclass
class IsiScenario:
    sigma2: float
    K: int = 1000
    taps: np.ndarray = field(default_factory=lambda: ISI_TAPS.copy())

    @property
    def N(self):
        return _next_pow2(self.K + len(self.taps) - 1)


def simulate_isi(u, scenario, rng):
    """Zero-padded linear convolution with the channel plus complex AWGN."""
    N = scenario.N
    y = np.zeros(N, dtype=complex)
    conv = np.convolve(np.asarray(u, dtype=float), scenario.taps)
    y[: conv.size] = conv
    y += np.sqrt(scenario.sigma2) * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    return y


def isi_freq_likelihood(y_f, h_f, sigma2, N):
    """Per-bin frequency-domain likelihood sites for u^f = y^f / h^f.

    Division by h^f_n scales the per-bin noise variance N sigma2 by
    1/|h^f_n|^2, giving circular Gaussians."""
    h_f = np.asarray(h_f, dtype=complex)
    if np.any(np.abs(h_f) < 1e-12):
        raise ZeroFrequencyResponse("channel frequency response has a zero bin")
    means = underline_vec(y_f / h_f).reshape(-1, 2)
    var = N * sigma2 / np.abs(h_f) ** 2
    covs = np.zeros((len(h_f), 2, 2))
    covs[:, 0, 0] = var
    covs[:, 1, 1] = var
    return DiagonalSiteSet.from_mean_cov(means, covs, "frequency")


def _sign_pos(x):
    return np.where(np.asarray(x) >= 0, 1, -1)


def zf_equalize(y_f, h_f, K):
    """Zero-forcing: invert the channel per bin and slice hard decisions."""
    h_f = np.asarray(h_f, dtype=complex)
    if np.any(np.abs(h_f) < 1e-12):
        raise ZeroFrequencyResponse("channel frequency response has a zero bin")
    u_hat = np.fft.ifft(np.asarray(y_f, dtype=complex) / h_f)
    return _sign_pos(u_hat.real[:K])


def lmmse_equalize(y_f, h_f, sigma2, K):
    """Classic per-bin Wiener equalizer followed by hard slicing.

    Treats the symbols as unit-power and circularly symmetric: the prior
    power of a frequency bin of the length-K block is K and the complex
    noise variance per bin is 2 N sigma2, giving the regularizer
    2 N sigma2 / K."""
    h_f = np.asarray(h_f, dtype=complex)
    N = len(h_f)
    u_f = np.conj(h_f) * np.asarray(y_f, dtype=complex) / (
        np.abs(h_f) ** 2 + 2.0 * N * sigma2 / K
    )
    return _sign_pos(np.fft.ifft(u_f).real[:K])


def viterbi_map_detect(y, h, sigma2, K):
    """Sequence-MAP BPSK detection on the terminated linear-convolution trellis.

    Scores only Re(y): taps and symbols are real, so the imaginary part
    carries no signal. sigma2 is accepted for interface symmetry; with a
    uniform prior the ML path does not depend on it."""
    h = np.asarray(h, dtype=float)
    T = len(h)
    if T > 12:
        raise StateSpaceTooLarge(f"{T} taps needs 2^{T - 1} states")
    y_re = np.asarray(y).real
    S = 1 << (T - 1)
    half = S >> 1
    bits = ((np.arange(S)[:, None] >> np.arange(T - 1)[None, :]) & 1).astype(float)
    sym = 2.0 * bits - 1.0  # sym[s, j] = u_{t-1-j} given state s
    contrib_full = sym @ h[1:]
    idx = np.arange(S)
    b_new = idx & 1
    u_new = 2.0 * b_new - 1.0
    q = idx >> 1

    M = np.full(S, np.inf)
    M[0] = 0.0  # virtual all-zeros history; masked contribs ignore upper bits
    bp = np.zeros((K, S), dtype=np.uint8)
    for t in range(K):
        if t < T - 1:
            contrib = sym[:, :t] @ h[1 : t + 1]
        else:
            contrib = contrib_full
        e0 = M[q] + (y_re[t] - h[0] * u_new - contrib[q]) ** 2
        e1 = M[q + half] + (y_re[t] - h[0] * u_new - contrib[q + half]) ** 2
        take1 = e1 < e0
        M = np.where(take1, e1, e0)
        bp[t] = take1.astype(np.uint8)
    # Tail: K <= t <= K+T-2 sees the last symbols shifted against zeros.
    tail = np.zeros(S)
    for d in range(min(T - 1, K)):
        i = np.arange(d + 1, T)
        pred = sym[:, i - 1 - d] @ h[i]
        tail += (y_re[K + d] - pred) ** 2
    s = int(np.argmin(M + tail))
    out = np.empty(K, dtype=int)
    for t in range(K - 1, -1, -1):
        out[t] = 2 * (s & 1) - 1
        s = (s >> 1) + int(bp[t, s]) * half
    return out


def brute_force_map(y, h, sigma2, K):
    """Exhaustive ML over all 2^K BPSK sequences (small-instance oracle)."""
    if K > 16:
        raise BlockTooLarge(f"K={K} exceeds the exhaustive-search limit")
    h = np.asarray(h, dtype=float)
    y_re = np.asarray(y).real[: K + len(h) - 1]
    bits = ((np.arange(1 << K)[:, None] >> np.arange(K)[None, :]) & 1).astype(float)
    seqs = 2.0 * bits - 1.0
    H = np.zeros((K, K + len(h) - 1))
    for k in range(K):
        H[k, k : k + len(h)] = h
    metrics = np.sum((y_re[None, :] - seqs @ H) ** 2, axis=1)
    return seqs[int(np.argmin(metrics))].astype(int)


# --- V-C: sparse radar channel -------------------------------------------------

@dataclass
class RadarScenario:
    sigma2: float
    N: int = 1024
    sparsity: float = 0.01
    var_large: float = 1.0  # per real dimension
    var_small: float = 0.01
    c: float = 3.25

    @property
    def mixture_var(self):
        """Per-dim variance of the mixture prior."""
        return self.sparsity * self.var_large + (1.0 - self.sparsity) * self.var_small


def sample_radar_channel(scenario, rng):
    """Per-tap two-component Gaussian mixture (sparse power-delay profile)."""
    N = scenario.N
    big = rng.random(N) < scenario.sparsity
    std = np.where(big, np.sqrt(scenario.var_large), np.sqrt(scenario.var_small))
    return std * (rng.standard_normal(N) + 1j * rng.standard_normal(N))


def sample_llrs(u_f, c, rng):
    """LLRs of the frequency-domain pilots: L_n ~ N(sign(u_n) c, 2c)."""
    u_f = np.asarray(u_f)
    return np.sign(u_f).real * c + np.sqrt(2.0 * c) * rng.standard_normal(len(u_f))


def llr_probs(L):
    """p(u = +1) from an LLR, numerically stable both ways."""
    return 1.0 / (1.0 + np.exp(-np.clip(L, -700, 700)))


def simulate_radar(h_f, u_f, sigma2, rng):
    """Frequency-domain observation y = u h^f + n (per-dim noise sigma2)."""
    N = len(h_f)
    n = np.sqrt(sigma2) * (rng.standard_normal(N) + 1j * rng.standard_normal(N))
    return u_f * h_f + n


def zf_channel_estimate(y_f, L):
    """Hard-decision channel estimate in the time domain."""
    u_hat = _sign_pos(L)
    return np.fft.ifft(np.asarray(y_f, dtype=complex) * u_hat)


def lmmse_channel_estimate(y_f, L, sigma2, prior_mode, prior_var=None):
    """Per-bin linear MMSE channel estimate from soft symbol statistics.

    With y = u h + n, u in {-1, +1} with soft mean m = tanh(L/2), the best
    linear estimate of h from y given an N(0, P I) channel prior is

        h_hat = m y P / (P + sigma2),

    since E[h y*] = m P and E[|y|^2] = P + sigma2 per real dimension.
    prior_mode "gaussian" sets P = N * prior_var (the sparse mixture
    moment-matched to one circular Gaussian, pushed to the frequency
    domain); "none" is the flat-prior limit P -> inf, h_hat = m y."""
    y_f = np.asarray(y_f, dtype=complex)
    m_u = np.tanh(np.asarray(L, dtype=float) / 2.0)
    if prior_mode == "none":
        est = m_u * y_f
    elif prior_mode == "gaussian":
        if prior_var is None:
            raise ValueError("prior_var required for prior_mode='gaussian'")
        P = len(y_f) * prior_var
        est = m_u * y_f * (P / (P + sigma2))
    else:
        raise ValueError(f"unknown prior_mode {prior_mode!r}")
    return np.fft.ifft(est)


# --- metrics -------------------------------------------------------------------

def ser(decided, truth):
    decided = np.asarray(decided)
    truth = np.asarray(truth)
    if decided.shape != truth.shape:
        raise LengthMismatch("decision and truth lengths differ")
    return float(np.mean(decided != truth))


def mse(estimate, truth):
    """Mean squared error per real dimension (|.|^2 / 2 for complex inputs)."""
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise LengthMismatch("estimate and truth lengths differ")
    err = np.mean(np.abs(estimate - truth) ** 2)
    if np.iscomplexobj(estimate) or np.iscomplexobj(truth):
        err = err / 2.0
    return float(err)
