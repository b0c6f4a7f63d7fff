"""Vectorized closed-form algebra for batches of 2x2 symmetric matrices.

All routines accept arrays of shape (..., 2, 2) / (..., 2) and broadcast.
These are the primitives behind message updates and EP site algebra, so
they avoid LAPACK calls entirely.
"""
import numpy as np

# Slack below which a covariance eigenvalue is still accepted as PSD.
EPS_PSD = 1e-12
# Strict threshold for precision-matrix validity (hard accept/reject).
EPS_PD = 0.0


def sym2(m):
    """Symmetrize (m + m^T)/2 along the last two axes."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def det2(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def inv2(m):
    """Closed-form inverse of 2x2 matrices."""
    d = det2(m)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out / d[..., None, None]


def matvec2(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def matmul2(a, b):
    return np.einsum("...ij,...jk->...ik", a, b)


def eigvals2_sym(m):
    """Eigenvalues (min, max) of symmetric 2x2 matrices via trace/determinant."""
    h = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    d = det2(m)
    off = 0.5 * (m[..., 0, 1] + m[..., 1, 0])
    r = np.sqrt(np.maximum(h * h - d, 0.25 * (m[..., 0, 0] - m[..., 1, 1]) ** 2 + off * off))
    return h - r, h + r


def is_pd2(m, eps=EPS_PD):
    """Strict positive-definiteness test (both eigenvalues > eps), after symmetrizing.

    For a symmetric 2x2 matrix this is equivalent to m00 > eps and det > eps^2-ish;
    the trace/determinant form avoids computing eigenvalues explicitly.
    """
    s = sym2(m)
    lo, _ = eigvals2_sym(s)
    return lo > eps


def is_psd2(m, eps=EPS_PSD):
    """PSD test with slack: smallest eigenvalue >= -eps."""
    s = sym2(m)
    lo, _ = eigvals2_sym(s)
    return lo >= -eps


def clip_eigvals2(m, floor):
    """Clamp eigenvalues of symmetric 2x2 matrices to at least `floor`.

    Uses the explicit spectral decomposition; batch-safe.
    """
    s = sym2(m)
    a = s[..., 0, 0]
    b = s[..., 0, 1]
    c = s[..., 1, 1]
    h = 0.5 * (a + c)
    r = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lo = h - r
    hi = h + r
    lo_c = np.maximum(lo, floor)
    hi_c = np.maximum(hi, floor)
    # Unit eigenvector (vx, vy) for the larger eigenvalue. For b == 0 the matrix is
    # already diagonal and the axis with the larger entry carries hi.
    offdiag = np.abs(b) > 0
    vx = np.where(offdiag, b, np.where(a >= c, 1.0, 0.0))
    vy = np.where(offdiag, hi - a, np.where(a >= c, 0.0, 1.0))
    nrm = np.sqrt(vx * vx + vy * vy)
    nrm = np.where(nrm == 0, 1.0, nrm)
    vx = vx / nrm
    vy = vy / nrm
    out = np.empty_like(s)
    out[..., 0, 0] = hi_c * vx * vx + lo_c * vy * vy
    out[..., 0, 1] = (hi_c - lo_c) * vx * vy
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = hi_c * vy * vy + lo_c * vx * vx
    return out


def rot2(w):
    """2x2 rotation-scaling block of a complex scalar w: [[Re, -Im], [Im, Re]]."""
    w = np.asarray(w)
    out = np.empty(w.shape + (2, 2), dtype=float)
    out[..., 0, 0] = w.real
    out[..., 0, 1] = -w.imag
    out[..., 1, 0] = w.imag
    out[..., 1, 1] = w.real
    return out
