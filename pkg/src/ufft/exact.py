"""Exact Gaussian uncertainty propagation through the dense DFT.

Works in the interleaved real representation: the N-point complex posterior
lives as a 2N-dim real Gaussian. The time-domain posterior precision is

    P = Lambda_t + U^T Lambda_f U,    U = underline_mat(W),

with block-diagonal site precisions Lambda_t, Lambda_f. The mean is obtained
from a linear solve (never the explicit inverse), the covariance from a
factorization-based inverse, and the frequency posterior is the pushforward
through U. Applications of U and U^T are done with FFTs, which is exact:
U x = interleave(fft(complex(x))) and U^T x = N interleave(ifft(complex(x))).
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, get_lapack_funcs

from .errors import NotPowerOfTwo, SingularSystem
from .gaussian import CanonGauss2, MomentGauss2, complex_of, underline_vec
from .linalg2 import inv2, is_pd2, matvec2, sym2

RCOND_MIN = 1e-12


def dft_matrix(N):
    """Dense symmetric N-point DFT matrix W_{kn} = exp(-2j pi k n / N)."""
    k = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(k, k) / N)


def _check_pow2(N):
    if N < 1 or (N & (N - 1)) != 0:
        raise NotPowerOfTwo(f"length {N} is not a power of two")


def fft_deterministic(x):
    """Hand-rolled radix-2 decimation-in-time FFT.

    Doubles as the wiring oracle for the factor graph: the same butterfly
    recursion, in the same order, is what the graph encodes.
    """
    x = np.asarray(x, dtype=complex)
    N = x.size
    _check_pow2(N)
    if N == 1:
        return x.copy()
    even = fft_deterministic(x[0::2])
    odd = fft_deterministic(x[1::2])
    tw = np.exp(-2j * np.pi * np.arange(N // 2) / N) * odd
    return np.concatenate([even + tw, even - tw])


class DiagonalSiteSet:
    """N independent canonical Gaussian sites, one per complex component.

    Array-backed: info has shape (N, 2), prec has shape (N, 2, 2). Improper
    sites (zero precision) are allowed and contribute nothing.
    """

    def __init__(self, domain, info, prec):
        assert domain in ("time", "frequency")
        self.domain = domain
        self.info = np.asarray(info, dtype=float)
        self.prec = np.asarray(prec, dtype=float)
        assert self.info.shape == (len(self), 2)
        assert self.prec.shape == (len(self), 2, 2)

    def __len__(self):
        return np.asarray(self.info).shape[0]

    def __getitem__(self, n):
        return CanonGauss2(info=self.info[n], prec=self.prec[n])

    @classmethod
    def improper(cls, N, domain):
        return cls(domain, np.zeros((N, 2)), np.zeros((N, 2, 2)))

    @classmethod
    def from_mean_cov(cls, means, covs, domain):
        """Proper sites from per-component moments (vectorized)."""
        means = np.asarray(means, dtype=float)
        covs = np.asarray(covs, dtype=float)
        prec = sym2(inv2(sym2(covs)))
        return cls(domain, matvec2(prec, means), prec)

    @classmethod
    def from_moments(cls, moments, domain):
        means = np.stack([m.mean for m in moments])
        covs = np.stack([m.cov for m in moments])
        return cls.from_mean_cov(means, covs, domain)

    def is_proper(self):
        """Per-site boolean array: precision strictly PD."""
        return is_pd2(self.prec)


@dataclass(frozen=True)
class MomentGaussN:
    """2N-dim real Gaussian: joint posterior over one domain."""

    mean: np.ndarray  # (2N,)
    cov: np.ndarray  # (2N, 2N)


def u_apply(x):
    """U x for a real (2N,) vector or columns of a (2N, M) matrix."""
    x = np.asarray(x, dtype=float)
    z = x[0::2] + 1j * x[1::2]
    f = np.fft.fft(z, axis=0)
    out = np.empty_like(x)
    out[0::2] = f.real
    out[1::2] = f.imag
    return out


def ut_apply(x):
    """U^T x = N ifft applied componentwise (U^T = underline of conj(W))."""
    x = np.asarray(x, dtype=float)
    z = x[0::2] + 1j * x[1::2]
    N = z.shape[0]
    f = N * np.fft.ifft(z, axis=0)
    out = np.empty_like(x)
    out[0::2] = f.real
    out[1::2] = f.imag
    return out


def _blockscale(prec, x):
    """Multiply rows of x (2N, M) blockwise by the (N, 2, 2) site precisions."""
    M = x.shape[1]
    xb = x.reshape(-1, 2, M)
    return np.einsum("nij,njm->nim", prec, xb).reshape(x.shape)


def _solve_spd(P, b):
    """Solve P mu = b and invert P, for symmetric P expected to be PD.

    Uses a Cholesky factorization with an rcond estimate; falls back to a
    symmetric indefinite (Bunch-Kaufman) factorization when Cholesky fails.
    Raises SingularSystem when the condition estimate exceeds 1/RCOND_MIN.
    """
    anorm = np.linalg.norm(P, 1)
    try:
        c, lower = cho_factor(P, lower=True, check_finite=False)
        pocon, potri = get_lapack_funcs(("pocon", "potri"), (P,))
        rcond, info = pocon(c, anorm, uplo="L")
        if info != 0 or not np.isfinite(rcond) or rcond < RCOND_MIN:
            raise SingularSystem(f"posterior precision rcond ~ {rcond:.2e}")
        mean = cho_solve((c, lower), b, check_finite=False)
        covu, info = potri(c, lower=1)
        if info != 0:
            raise SingularSystem("potri failed on posterior precision")
        cov = np.tril(covu) + np.tril(covu, -1).T
        return mean, cov
    except LinAlgError:
        pass
    sytrf, sycon, sytrs = get_lapack_funcs(("sytrf", "sycon", "sytrs"), (P,))
    ldu, ipiv, info = sytrf(P, lower=1)
    if info != 0:
        raise SingularSystem("symmetric factorization failed (exactly singular)")
    rcond, info = sycon(ldu, ipiv, anorm, lower=1)
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise SingularSystem(f"posterior precision rcond ~ {rcond:.2e}")
    mean, info = sytrs(ldu, ipiv, b, lower=1)
    if info != 0:
        raise SingularSystem("sytrs failed on posterior precision")
    cov, info = sytrs(ldu, ipiv, np.eye(P.shape[0]), lower=1)
    if info != 0:
        raise SingularSystem("sytrs failed on posterior precision")
    return mean, cov


def posterior_precision_info(time_sites, freq_sites):
    """Assemble the time-domain precision P and information vector b."""
    N = len(time_sites)
    if len(freq_sites) != N:
        raise ValueError("site sets must have equal length")
    eye = np.eye(2 * N)
    # U^T Lambda_f U, built by operator application on the columns of I.
    A = ut_apply(_blockscale(freq_sites.prec, u_apply(eye)))
    for n in range(N):
        A[2 * n:2 * n + 2, 2 * n:2 * n + 2] += time_sites.prec[n]
    P = 0.5 * (A + A.T)
    b = time_sites.info.reshape(-1) + ut_apply(freq_sites.info.reshape(-1))
    return P, b


def exact_posterior(time_sites, freq_sites):
    """Closed-form Gaussian posterior in both domains.

    Returns (time, freq) MomentGaussN. Individual sites may be improper as
    long as the combined precision is nonsingular.
    """
    P, b = posterior_precision_info(time_sites, freq_sites)
    mean_t, cov_t = _solve_spd(P, b)
    cov_t = 0.5 * (cov_t + cov_t.T)
    mean_f = u_apply(mean_t)
    cov_f = u_apply(u_apply(cov_t).T)
    cov_f = 0.5 * (cov_f + cov_f.T)
    return MomentGaussN(mean_t, cov_t), MomentGaussN(mean_f, cov_f)


def posterior_mean(time_sites, freq_sites):
    """Time and frequency posterior means only (no 2Nx2N inverse)."""
    P, b = posterior_precision_info(time_sites, freq_sites)
    anorm = np.linalg.norm(P, 1)
    try:
        c, lower = cho_factor(P, lower=True, check_finite=False)
        pocon, = get_lapack_funcs(("pocon",), (P,))
        rcond, info = pocon(c, anorm, uplo="L")
        if info != 0 or not np.isfinite(rcond) or rcond < RCOND_MIN:
            raise SingularSystem(f"posterior precision rcond ~ {rcond:.2e}")
        mean_t = cho_solve((c, lower), b, check_finite=False)
    except LinAlgError:
        mean_t, _ = _solve_spd(P, b)
    return mean_t, u_apply(mean_t)


def marginals_of(g):
    """Per-component 2-dim marginals of a MomentGaussN."""
    N = g.mean.size // 2
    out = []
    for n in range(N):
        sl = slice(2 * n, 2 * n + 2)
        out.append(MomentGauss2(mean=g.mean[sl], cov=sym2(g.cov[sl, sl])))
    return out


def marginal_arrays(g):
    """Marginals as stacked arrays: means (N, 2), covs (N, 2, 2)."""
    means = g.mean.reshape(-1, 2)
    N = means.shape[0]
    covs = np.empty((N, 2, 2))
    for n in range(N):
        covs[n] = g.cov[2 * n:2 * n + 2, 2 * n:2 * n + 2]
    return means.copy(), sym2(covs)
