"""Tests for the interleaved real representation and 2-dim Gaussian forms."""
import numpy as np
import pytest

from ufft.errors import NotPositiveDefinite
from ufft.gaussian import (
    CanonGauss2, MomentGauss2, canon_to_moment, complex_of,
    gauss_product_canon, is_positive_definite, moment_to_canon,
    underline_mat, underline_vec,
)


class TestUnderlineVec:
    def test_scalar(self):
        assert np.allclose(underline_vec(1 + 2j), [1.0, 2.0])

    def test_vector(self):
        assert np.allclose(underline_vec([1j, -1]), [0.0, 1.0, -1.0, 0.0])

    def test_isometry(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        assert np.isclose(np.linalg.norm(underline_vec(a)), np.linalg.norm(a))

    def test_complex_of_roundtrip(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        assert np.allclose(complex_of(underline_vec(a)), a)


class TestUnderlineMat:
    def test_scalar_j(self):
        assert np.allclose(underline_mat(np.array([[1j]])), [[0.0, -1.0], [1.0, 0.0]])

    def test_identity(self):
        assert np.allclose(underline_mat(np.eye(5)), np.eye(10))

    def test_dft2_action(self):
        W = np.array([[1, 1], [1, -1]], dtype=complex)
        b = np.array([1.0, 1j])
        out = underline_mat(W) @ underline_vec(b)
        assert np.allclose(out, underline_vec(W @ b))
        assert np.allclose(out, [1.0, 1.0, 1.0, -1.0])

    def test_matvec_commutes(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        assert np.allclose(underline_mat(A) @ underline_vec(b), underline_vec(A @ b))

    def test_ring_homomorphism(self):
        # Products and sums carry over to the real embedding.
        rng = np.random.default_rng(3)
        for n in (2, 4, 8):
            A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            assert np.allclose(
                underline_mat(A @ B), underline_mat(A) @ underline_mat(B), atol=1e-10
            )
            assert np.allclose(
                underline_mat(A + B), underline_mat(A) + underline_mat(B), atol=1e-10
            )


class TestConversions:
    def test_canon_to_moment_identity(self):
        g = canon_to_moment(CanonGauss2(np.zeros(2), np.eye(2)))
        assert np.allclose(g.mean, 0) and np.allclose(g.cov, np.eye(2))

    def test_canon_to_moment_diagonal(self):
        g = canon_to_moment(CanonGauss2(np.array([2.0, 0.0]), 2 * np.eye(2)))
        assert np.allclose(g.mean, [1.0, 0.0])
        assert np.allclose(g.cov, 0.5 * np.eye(2))

    def test_roundtrip_random_spd(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            a = rng.standard_normal((2, 2))
            cov = a @ a.T + 0.1 * np.eye(2)
            g = MomentGauss2(rng.standard_normal(2), cov)
            back = canon_to_moment(moment_to_canon(g))
            assert np.allclose(back.mean, g.mean, rtol=1e-10, atol=1e-12)
            assert np.allclose(back.cov, g.cov, rtol=1e-10, atol=1e-12)

    def test_rejects_improper(self):
        with pytest.raises(NotPositiveDefinite):
            canon_to_moment(CanonGauss2(np.zeros(2), np.zeros((2, 2))))
        with pytest.raises(NotPositiveDefinite):
            moment_to_canon(MomentGauss2(np.zeros(2), np.diag([1.0, -1.0])))


class TestGaussProduct:
    def test_zero_site_is_identity(self):
        a = CanonGauss2(np.array([0.3, -1.2]), np.array([[2.0, 0.5], [0.5, 1.0]]))
        zero = CanonGauss2(np.zeros(2), np.zeros((2, 2)))
        out = gauss_product_canon(a, zero)
        assert np.array_equal(out.info, a.info)
        assert np.array_equal(out.prec, a.prec)

    def test_additivity(self):
        a = CanonGauss2(np.array([1.0, 0.0]), np.eye(2))
        b = CanonGauss2(np.array([0.0, 1.0]), np.eye(2))
        out = gauss_product_canon(a, b)
        assert np.array_equal(out.info, [1.0, 1.0])
        assert np.array_equal(out.prec, 2 * np.eye(2))

    def test_commutative_associative_exact(self):
        # Dyadic-rational parameters keep every sum exact in binary floating
        # point, so the pure-addition identities hold bit for bit.
        rng = np.random.default_rng(5)
        gs = [
            CanonGauss2(
                rng.integers(-512, 512, 2) / 256.0,
                rng.integers(-512, 512, (2, 2)) / 256.0,
            )
            for _ in range(3)
        ]
        ab = gauss_product_canon(gs[0], gs[1])
        ba = gauss_product_canon(gs[1], gs[0])
        assert np.array_equal(ab.info, ba.info) and np.array_equal(ab.prec, ba.prec)
        left = gauss_product_canon(ab, gs[2])
        right = gauss_product_canon(gs[0], gauss_product_canon(gs[1], gs[2]))
        assert np.array_equal(left.info, right.info)
        assert np.array_equal(left.prec, right.prec)

    def test_repeated_product_keeps_mean(self):
        # The product of k identical proper sites has the single-site mean.
        site = moment_to_canon(
            MomentGauss2(np.array([0.7, -0.2]), np.array([[1.5, 0.3], [0.3, 0.8]]))
        )
        acc = site
        for _ in range(4):
            acc = gauss_product_canon(acc, site)
        single = canon_to_moment(site)
        assert np.allclose(canon_to_moment(acc).mean, single.mean, atol=1e-12)


def test_is_positive_definite_scalar():
    assert is_positive_definite(np.eye(2))
    assert not is_positive_definite(np.array([[1.0, 0.0], [0.0, -0.1]]))
    assert is_positive_definite(np.array([[1.0, 0.999], [0.999, 1.0]]))
