"""FFT butterfly factor graph and Gaussian belief propagation on it.

The graph is the radix-2 decimation-in-time factorization of the N-point
DFT: m = log2 N stages of N/2 butterflies wired in place. Variable edges
live on stage boundaries 0..m; boundary 0 carries the time components in
bit-reversed order, boundary m the frequency components in natural order.
Each edge holds two directed messages (forward toward the frequency side,
backward toward the time side), stored as per-boundary arrays of 2-dim
means and 2x2 covariances.
"""
import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NonFiniteMessage, NotPowerOfTwo
from .exact import DiagonalSiteSet
from .gaussian import MomentGauss2
from .linalg2 import inv2, is_pd2, matvec2, sym2

V_LARGE = 1e12
TAU_CONV = 1e-5


class Schedule(enum.Enum):
    FLOODING = "flooding"
    LAYERED = "layered"


@dataclass(frozen=True)
class ButterflyNode:
    """One clustered butterfly factor (introspection only; kernels use arrays)."""

    stage: int  # 1-based
    index: int  # within stage
    twiddle: complex  # omega_{2^stage}^k
    x0: tuple  # (boundary, position) of the four ports
    x1: tuple
    y0: tuple
    y1: tuple


@dataclass
class ConvergenceReport:
    converged: bool
    bp_iterations: int
    layered_iterations: float
    deltas: list = field(default_factory=list)


def bit_reverse(i, bits):
    """Reverse the `bits` binary digits of i."""
    r = 0
    for _ in range(bits):
        r = (r << 1) | (i & 1)
        i >>= 1
    return r


class FftGraph:
    """Wiring and twiddles of the radix-2 DIT graph for one N."""

    def __init__(self, N):
        if N < 2 or (N & (N - 1)) != 0:
            raise NotPowerOfTwo(f"graph size {N} is not a power of two >= 2")
        self.N = N
        self.m = N.bit_length() - 1
        self.bitrev = np.array([bit_reverse(i, self.m) for i in range(N)])
        # Per stage s (1-based, stored at s-1): leg indices and twiddles.
        self.idx0, self.idx1, self.wr, self.wi = [], [], [], []
        for s in range(1, self.m + 1):
            n = 1 << s
            half = n >> 1
            k = np.arange(N // 2)
            block = k // half
            off = k % half
            i0 = block * n + off
            i1 = i0 + half
            w = np.exp(-2j * np.pi * off / n)
            self.idx0.append(i0.astype(np.intp))
            self.idx1.append(i1.astype(np.intp))
            self.wr.append(np.ascontiguousarray(w.real))
            self.wi.append(np.ascontiguousarray(w.imag))

    def nodes(self):
        """Yield ButterflyNode descriptors (for inspection and small tests)."""
        for s in range(1, self.m + 1):
            for j in range(self.N // 2):
                i0 = int(self.idx0[s - 1][j])
                i1 = int(self.idx1[s - 1][j])
                yield ButterflyNode(
                    stage=s,
                    index=j,
                    twiddle=complex(self.wr[s - 1][j], self.wi[s - 1][j]),
                    x0=(s - 1, i0),
                    x1=(s - 1, i1),
                    y0=(s, i0),
                    y1=(s, i1),
                )

    def deterministic_transform(self, x):
        """Push a complex vector through the stored wiring (mean arithmetic).

        Reproduces fft_deterministic exactly when the wiring is correct, so
        this is the graph-validation oracle.
        """
        arr = np.asarray(x, dtype=complex)[self.bitrev].copy()
        for s in range(self.m):
            w = self.wr[s] + 1j * self.wi[s]
            t = w * arr[self.idx1[s]]
            e = arr[self.idx0[s]]
            arr[self.idx0[s]] = e + t
            arr[self.idx1[s]] = e - t
        return arr


def build_graph(N):
    return FftGraph(N)


class GabpState:
    """Directed messages on all boundaries (mutable; owned by one run)."""

    def __init__(self, graph, v_large=V_LARGE):
        m, N = graph.m, graph.N
        self.v_large = v_large
        self.fwd_mean = np.zeros((m + 1, N, 2))
        self.fwd_cov = np.zeros((m + 1, N, 2, 2))
        self.bwd_mean = np.zeros((m + 1, N, 2))
        self.bwd_cov = np.zeros((m + 1, N, 2, 2))
        flat = v_large * np.eye(2)
        self.fwd_cov[:] = flat
        self.bwd_cov[:] = flat


def _site_messages(sites, v_large):
    """Boundary messages for a site set: moments, or flat where improper."""
    N = len(sites)
    mean = np.zeros((N, 2))
    cov = np.empty((N, 2, 2))
    cov[:] = v_large * np.eye(2)
    proper = sites.is_proper()
    if np.any(proper):
        covp = sym2(inv2(sym2(sites.prec[proper])))
        cov[proper] = covp
        mean[proper] = matvec2(covp, sites.info[proper])
    return mean, cov


def _beliefs(site_info, site_prec, msg_mean, msg_cov, v_large):
    """Canonical product of site and incident message, as moment arrays."""
    prec_m = inv2(sym2(msg_cov))
    prec = sym2(site_prec + prec_m)
    info = site_info + matvec2(prec_m, msg_mean)
    proper = is_pd2(prec)
    # Improper products are reported as flat beliefs.
    prec_r = np.where(proper[:, None, None], prec, np.eye(2) / v_large)
    cov = sym2(inv2(prec_r))
    mean = matvec2(cov, info)
    mean[~proper] = 0.0
    return mean, cov


@dataclass
class GabpResult:
    time_mean: np.ndarray  # (N, 2)
    time_cov: np.ndarray  # (N, 2, 2)
    freq_mean: np.ndarray
    freq_cov: np.ndarray
    report: ConvergenceReport
    state: GabpState

    @property
    def time_beliefs(self):
        return [MomentGauss2(self.time_mean[n], self.time_cov[n]) for n in range(len(self.time_mean))]

    @property
    def freq_beliefs(self):
        return [MomentGauss2(self.freq_mean[n], self.freq_cov[n]) for n in range(len(self.freq_mean))]


def _internal_snapshot(state, m):
    return (
        state.fwd_mean[1:m].copy(),
        state.fwd_cov[1:m].copy(),
        state.bwd_mean[1:m].copy(),
        state.bwd_cov[1:m].copy(),
    )


def _max_rel_delta(state, m, snap):
    fm, fc, bm, bc = snap
    if m <= 1:
        return 0.0
    d = 0.0
    for new, old in (
        (state.fwd_mean[1:m], fm),
        (state.fwd_cov[1:m], fc),
        (state.bwd_mean[1:m], bm),
        (state.bwd_cov[1:m], bc),
    ):
        d = max(d, float(np.max(np.abs(new - old) / (1.0 + np.abs(old)))))
    return d


def run_gabp(
    graph,
    time_sites,
    freq_sites,
    schedule=Schedule.FLOODING,
    max_layered_iters=50,
    tau_conv=TAU_CONV,
    v_large=V_LARGE,
    state=None,
):
    """GaBP on the FFT graph. Returns a GabpResult with per-edge beliefs.

    Boundary messages are pinned to the site moments (flat for improper
    sites); internal messages start flat unless a warm-start state is given.
    Convergence: every internal message parameter p satisfies
    |p_new - p_old| <= tau_conv (1 + |p_old|), checked once per schedule pass.
    """
    N, m = graph.N, graph.m
    if len(time_sites) != N or len(freq_sites) != N:
        raise ValueError("site sets must match the graph size")
    if state is None:
        state = GabpState(graph, v_large)
    t_mean, t_cov = _site_messages(time_sites, v_large)
    # Boundary 0 carries time components in bit-reversed order.
    br = graph.bitrev
    state.fwd_mean[0] = t_mean[br]
    state.fwd_cov[0] = t_cov[br]
    f_mean, f_cov = _site_messages(freq_sites, v_large)
    state.bwd_mean[m] = f_mean
    state.bwd_cov[m] = f_cov

    if schedule is Schedule.FLOODING:
        report = _run_flooding(graph, state, max_layered_iters, tau_conv)
    else:
        report = _run_layered(graph, state, max_layered_iters, tau_conv)

    if not (
        np.isfinite(state.fwd_mean).all()
        and np.isfinite(state.bwd_mean).all()
        and np.isfinite(state.fwd_cov).all()
        and np.isfinite(state.bwd_cov).all()
    ):
        raise NonFiniteMessage("non-finite GaBP message after iteration")

    tb_mean, tb_cov = _beliefs(
        time_sites.info[br], time_sites.prec[br], state.bwd_mean[0], state.bwd_cov[0], v_large
    )
    # Undo the bit-reversal so belief n corresponds to u^t_n.
    inv = np.empty(N, dtype=np.intp)
    inv[br] = np.arange(N)
    tb_mean, tb_cov = tb_mean[inv], tb_cov[inv]
    fb_mean, fb_cov = _beliefs(
        freq_sites.info, freq_sites.prec, state.fwd_mean[m], state.fwd_cov[m], v_large
    )
    return GabpResult(tb_mean, tb_cov, fb_mean, fb_cov, report, state)


def _run_flooding(graph, state, max_layered_iters, tau_conv):
    m = graph.m
    per_layered = 2 * m - 1
    max_bp = max_layered_iters * per_layered
    nxt = GabpState(graph, state.v_large)
    nxt.fwd_mean[0] = state.fwd_mean[0]
    nxt.fwd_cov[0] = state.fwd_cov[0]
    nxt.bwd_mean[m] = state.bwd_mean[m]
    nxt.bwd_cov[m] = state.bwd_cov[m]
    deltas = []
    converged = False
    it = 0
    while it < max_bp:
        it += 1
        for s in range(m):
            kernels.stage_forward(
                state.fwd_mean[s], state.fwd_cov[s],
                state.bwd_mean[s + 1], state.bwd_cov[s + 1],
                graph.idx0[s], graph.idx1[s], graph.wr[s], graph.wi[s],
                nxt.fwd_mean[s + 1], nxt.fwd_cov[s + 1],
            )
            kernels.stage_backward(
                state.bwd_mean[s + 1], state.bwd_cov[s + 1],
                state.fwd_mean[s], state.fwd_cov[s],
                graph.idx0[s], graph.idx1[s], graph.wr[s], graph.wi[s],
                nxt.bwd_mean[s], nxt.bwd_cov[s],
            )
        snap = (state.fwd_mean[1:m], state.fwd_cov[1:m], state.bwd_mean[1:m], state.bwd_cov[1:m])
        d = _max_rel_delta(nxt, m, snap)
        deltas.append(d)
        state.fwd_mean, nxt.fwd_mean = nxt.fwd_mean, state.fwd_mean
        state.fwd_cov, nxt.fwd_cov = nxt.fwd_cov, state.fwd_cov
        state.bwd_mean, nxt.bwd_mean = nxt.bwd_mean, state.bwd_mean
        state.bwd_cov, nxt.bwd_cov = nxt.bwd_cov, state.bwd_cov
        if d <= tau_conv:
            converged = True
            break
    return ConvergenceReport(converged, it, it / per_layered, deltas)


def _run_layered(graph, state, max_layered_iters, tau_conv):
    m = graph.m
    per_layered = 2 * m - 1
    deltas = []
    converged = False
    passes = 0
    while passes < max_layered_iters:
        passes += 1
        snap = _internal_snapshot(state, m)
        # Left to right: forward messages, one stage per BP iteration.
        for s in range(m):
            kernels.stage_forward(
                state.fwd_mean[s], state.fwd_cov[s],
                state.bwd_mean[s + 1], state.bwd_cov[s + 1],
                graph.idx0[s], graph.idx1[s], graph.wr[s], graph.wi[s],
                state.fwd_mean[s + 1], state.fwd_cov[s + 1],
            )
        # Back again: stages m..2 (stage 1's backward output is a boundary
        # message and does not feed further updates).
        for s in range(m - 1, 0, -1):
            kernels.stage_backward(
                state.bwd_mean[s + 1], state.bwd_cov[s + 1],
                state.fwd_mean[s], state.fwd_cov[s],
                graph.idx0[s], graph.idx1[s], graph.wr[s], graph.wi[s],
                state.bwd_mean[s], state.bwd_cov[s],
            )
        d = _max_rel_delta(state, m, snap)
        deltas.append(d)
        if d <= tau_conv:
            converged = True
            break
    # Final backward step onto the time boundary for belief extraction.
    kernels.stage_backward(
        state.bwd_mean[1], state.bwd_cov[1],
        state.fwd_mean[0], state.fwd_cov[0],
        graph.idx0[0], graph.idx1[0], graph.wr[0], graph.wi[0],
        state.bwd_mean[0], state.bwd_cov[0],
    )
    bp = passes * per_layered
    return ConvergenceReport(converged, bp, float(passes), deltas)


def butterfly_forward(node, nu_x0, nu_x1, nu_y0, nu_y1):
    """Single-node forward update (xi_y0, xi_y1); wraps the stage kernel."""
    return _single_node(kernels.stage_forward, node, nu_x0, nu_x1, nu_y0, nu_y1, forward=True)


def butterfly_backward(node, nu_x0, nu_x1, nu_y0, nu_y1):
    """Single-node backward update (xi_x0, xi_x1)."""
    return _single_node(kernels.stage_backward, node, nu_x0, nu_x1, nu_y0, nu_y1, forward=False)


def _single_node(fn, node, nu_x0, nu_x1, nu_y0, nu_y1, forward):
    mx = np.stack([nu_x0.mean, nu_x1.mean])
    cx = np.stack([nu_x0.cov, nu_x1.cov])
    my = np.stack([nu_y0.mean, nu_y1.mean])
    cy = np.stack([nu_y0.cov, nu_y1.cov])
    i0 = np.array([0], dtype=np.intp)
    i1 = np.array([1], dtype=np.intp)
    wr = np.array([node.twiddle.real])
    wi = np.array([node.twiddle.imag])
    om = np.zeros((2, 2))
    oc = np.zeros((2, 2, 2))
    if forward:
        fn(mx, cx, my, cy, i0, i1, wr, wi, om, oc)
    else:
        fn(my, cy, mx, cx, i0, i1, wr, wi, om, oc)
    if not (np.isfinite(om).all() and np.isfinite(oc).all()):
        raise NonFiniteMessage("non-finite butterfly output")
    return MomentGauss2(om[0], oc[0]), MomentGauss2(om[1], oc[1])


def compute_beliefs(sites, msg_means, msg_covs, v_large=V_LARGE):
    """Boundary beliefs: canonical product of site and opposing message."""
    mean, cov = _beliefs(sites.info, sites.prec, msg_means, msg_covs, v_large)
    return [MomentGauss2(mean[n], cov[n]) for n in range(len(sites))]
