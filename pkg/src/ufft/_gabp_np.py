"""NumPy reference kernel for GaBP butterfly stage updates.

One stage update processes all butterflies of a stage at once. The 4x4
marginalization of the butterfly constraint is carried out in closed 2x2
form: the pushforward of two independent inputs through y = B x (or its
inverse) gives a correlated pair, and fusing the opposing incident message
on one output is a single 2x2 conditioning step.

Shared layout with the compiled kernel: messages live in (N, 2) mean and
(N, 2, 2) covariance arrays per boundary; i0/i1 index the two legs of each
butterfly and (wr, wi) is its twiddle factor.
"""
import numpy as np

BACKEND = "numpy"


def _inv2(m):
    d = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    out = np.empty_like(m)
    out[:, 0, 0] = m[:, 1, 1]
    out[:, 1, 1] = m[:, 0, 0]
    out[:, 0, 1] = -m[:, 0, 1]
    out[:, 1, 0] = -m[:, 1, 0]
    return out / d[:, None, None]


def _mm(a, b):
    return np.einsum("nij,njk->nik", a, b)


def _mv(a, v):
    return np.einsum("nij,nj->ni", a, v)


def _sym(m):
    return 0.5 * (m + np.swapaxes(m, 1, 2))


def _rot_apply(wr, wi, v):
    """Apply the rotation-scaling block of w = wr + j wi to (n, 2) vectors."""
    out = np.empty_like(v)
    out[:, 0] = wr * v[:, 0] - wi * v[:, 1]
    out[:, 1] = wi * v[:, 0] + wr * v[:, 1]
    return out


def _rot_apply_t(wr, wi, v):
    out = np.empty_like(v)
    out[:, 0] = wr * v[:, 0] + wi * v[:, 1]
    out[:, 1] = -wi * v[:, 0] + wr * v[:, 1]
    return out


def _rot_sandwich(wr, wi, S):
    """R S R^T for the rotation-scaling block R of w."""
    R = np.empty_like(S)
    R[:, 0, 0] = wr
    R[:, 0, 1] = -wi
    R[:, 1, 0] = wi
    R[:, 1, 1] = wr
    return _mm(R, _mm(S, np.swapaxes(R, 1, 2)))


def stage_forward(mx, cx, my, cy, i0, i1, wr, wi, om, oc):
    """Forward messages of one stage: (nu_x0, nu_x1, nu_y0, nu_y1) -> (xi_y0, xi_y1).

    mx/cx hold the incoming forward messages on the input boundary, my/cy
    the opposing backward messages on the output boundary. Results are
    scattered into om/oc on the output boundary.
    """
    m0, S0 = mx[i0], cx[i0]
    m1, S1 = mx[i1], cx[i1]
    p0, T0 = my[i0], cy[i0]
    p1, T1 = my[i1], cy[i1]

    # Pushforward through y0 = x0 + w x1, y1 = x0 - w x1.
    Rm1 = _rot_apply(wr, wi, m1)
    a = m0 + Rm1
    b = m0 - Rm1
    G = _rot_sandwich(wr, wi, S1)
    S00 = S0 + G  # cov(y0) = cov(y1)
    S01 = S0 - G  # cross covariance, symmetric

    # xi_y0: condition the (y0, y1) pair on nu_y1.
    K = _mm(S01, _inv2(S00 + T1))
    om[i0] = a + _mv(K, p1 - b)
    oc[i0] = _sym(S00 - _mm(K, S01))

    # xi_y1: condition on nu_y0.
    K = _mm(S01, _inv2(S00 + T0))
    om[i1] = b + _mv(K, p0 - a)
    oc[i1] = _sym(S00 - _mm(K, S01))


def stage_backward(my, cy, mx, cx, i0, i1, wr, wi, om, oc):
    """Backward messages of one stage: -> (xi_x0, xi_x1) on the input boundary.

    Pushforward through the inverse butterfly x0 = (y0 + y1)/2,
    x1 = conj(w) (y0 - y1)/2, then condition on the opposing nu_x message.
    """
    p0, T0 = my[i0], cy[i0]
    p1, T1 = my[i1], cy[i1]
    m0, S0 = mx[i0], cx[i0]
    m1, S1 = mx[i1], cx[i1]

    c = 0.5 * (p0 + p1)
    d = 0.5 * _rot_apply_t(wr, wi, p0 - p1)
    Tsum = T0 + T1
    T00 = 0.25 * Tsum  # cov(x0)
    T11 = 0.25 * _rot_sandwich(wr, -wi, Tsum)  # R^T Tsum R / 4 (R^T is the block of conj w)
    # cov(x0, x1) = (T0 - T1) R / 4, generally not symmetric.
    R = np.empty_like(T0)
    R[:, 0, 0] = wr
    R[:, 0, 1] = -wi
    R[:, 1, 0] = wi
    R[:, 1, 1] = wr
    T01 = 0.25 * _mm(T0 - T1, R)
    T10 = np.swapaxes(T01, 1, 2)

    # xi_x0: condition on nu_x1.
    K = _mm(T01, _inv2(T11 + S1))
    om[i0] = c + _mv(K, m1 - d)
    oc[i0] = _sym(T00 - _mm(K, T10))

    # xi_x1: condition on nu_x0.
    K = _mm(T10, _inv2(T00 + S0))
    om[i1] = d + _mv(K, m0 - c)
    oc[i1] = _sym(T11 - _mm(K, T01))
