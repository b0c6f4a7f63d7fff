"""Uncertainty propagation through the DFT/FFT.

Exact Gaussian fusion across the time and frequency domains, Gaussian
belief propagation on the FFT butterfly factor graph, and expectation
propagation for non-Gaussian priors and likelihoods.
"""
from .errors import (
    BlockTooLarge, DegenerateTilt, LengthMismatch, MaxItersExceeded,
    NonFiniteMessage, NotPositiveDefinite, NotPowerOfTwo, SingularSystem,
    StateSpaceTooLarge, UfftError, ZeroFrequencyResponse,
)
from .gaussian import (
    CanonGauss2, MomentGauss2, canon_to_moment, complex_of,
    gauss_product_canon, is_positive_definite, moment_to_canon,
    underline_mat, underline_vec,
)
from .exact import (
    DiagonalSiteSet, MomentGaussN, dft_matrix, exact_posterior,
    fft_deterministic, marginals_of,
)
from .graph import (
    ConvergenceReport, FftGraph, Schedule, V_LARGE, bit_reverse,
    build_graph, butterfly_backward, butterfly_forward, compute_beliefs,
    run_gabp,
)
from .ep import (
    DiscretePmf, EpConfig, FixedGaussian, GaussMix, SiteParams,
    ep_dft, ep_fft, ep_site_update, tilted_moments,
)
from .kernels import BACKEND

__version__ = "0.1.0"
