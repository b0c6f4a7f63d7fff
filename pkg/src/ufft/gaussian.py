"""Complex scalars as 2-dim real Gaussians and the interleaved real representation.

A complex random scalar z is handled as the real vector (Re z, Im z) with a
2x2 covariance. Complex matrices become real ones built from rotation-scaling
blocks [[Re, -Im], [Im, Re]], so that complex linear algebra carries over
verbatim to the real embedding.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite
from .linalg2 import EPS_PD, inv2, is_pd2, matvec2, sym2


@dataclass(frozen=True)
class MomentGauss2:
    """2-dim real Gaussian in moment form (mean, covariance)."""

    mean: np.ndarray  # shape (2,)
    cov: np.ndarray  # shape (2, 2), symmetric PSD

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))


@dataclass(frozen=True)
class CanonGauss2:
    """2-dim real Gaussian in canonical form (info vector gamma, precision lambda).

    The precision may be zero or indefinite (improper site); only the
    conversion to moment form requires positive definiteness.
    """

    info: np.ndarray  # shape (2,)
    prec: np.ndarray  # shape (2, 2), symmetric

    def __post_init__(self):
        object.__setattr__(self, "info", np.asarray(self.info, dtype=float))
        object.__setattr__(self, "prec", np.asarray(self.prec, dtype=float))


def underline_vec(a):
    """Interleave a complex vector into (Re a_0, Im a_0, Re a_1, Im a_1, ...)."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    out = np.empty(2 * a.size, dtype=float)
    out[0::2] = a.real
    out[1::2] = a.imag
    return out


def complex_of(x):
    """Inverse of underline_vec: real length-2N vector back to complex length N."""
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def underline_mat(A):
    """Embed a complex MxN matrix as the real 2Mx2N matrix of 2x2 blocks."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    M, N = A.shape
    out = np.empty((2 * M, 2 * N), dtype=float)
    out[0::2, 0::2] = A.real
    out[0::2, 1::2] = -A.imag
    out[1::2, 0::2] = A.imag
    out[1::2, 1::2] = A.real
    return out


def is_positive_definite(m, eps=EPS_PD):
    """Strict PD test for a 2x2 matrix (symmetrized first)."""
    return bool(is_pd2(np.asarray(m, dtype=float), eps=eps))


def canon_to_moment(g):
    if not is_pd2(g.prec):
        raise NotPositiveDefinite("precision matrix is not positive definite")
    cov = sym2(inv2(sym2(g.prec)))
    return MomentGauss2(mean=matvec2(cov, g.info), cov=cov)


def moment_to_canon(g):
    if not is_pd2(g.cov):
        raise NotPositiveDefinite("covariance matrix is not positive definite")
    prec = sym2(inv2(sym2(g.cov)))
    return CanonGauss2(info=matvec2(prec, g.mean), prec=prec)


def gauss_product_canon(a, b):
    """Product of two canonical Gaussians: parameters add. May be improper."""
    return CanonGauss2(info=a.info + b.info, prec=a.prec + b.prec)
