import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph
from graphcnn.errors import DegreeError, DualityError, NumericError, ShapeError
from graphcnn.graph import Graph, Permutation, identity_graph, make_rng, permute, permute_signal, ring_graph
from graphcnn.gsp import (FilterCoeffs, RepeatedSpectrumWarning, Spectrum, dft_matrix, gft_apply, igft_apply,
                          poly_filter, polymul, shift, spectral_filter, spectrum)


def dense_poly(a, alpha, x):
    """Oracle: explicit matrix powers."""
    out = np.zeros_like(x, dtype=float)
    ak = np.eye(a.shape[0])
    for c in alpha:
        out += c * (ak @ x)
        ak = ak @ a
    return out


class TestShift:
    def test_ring_delay(self):
        x = np.array([10.0, 11, 12, 13])
        np.testing.assert_array_equal(shift(ring_graph(4), x), [13, 10, 11, 12])

    def test_empty(self):
        np.testing.assert_array_equal(shift(Graph.empty(3), np.ones(3)), 0)

    def test_cyclic_order(self, rng):
        x = rng.normal(size=7)
        y = x
        for _ in range(7):
            y = shift(ring_graph(7), y)
        np.testing.assert_array_equal(y, x)

    def test_shape(self):
        with pytest.raises(ShapeError):
            shift(ring_graph(3), np.ones(4))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 15), st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 2**32))
    def test_linearity_exact(self, n, a, b, seed):
        # integer data keeps every product exact
        rng = make_rng(seed)
        g = random_graph(rng, n, directed=True, weighted=False)
        x = rng.integers(-5, 5, size=(n, 2)).astype(float)
        y = rng.integers(-5, 5, size=(n, 2)).astype(float)
        np.testing.assert_array_equal(shift(g, a * x + b * y), a * shift(g, x) + b * shift(g, y))


class TestPolyFilter:
    def test_identity_filter(self, er20, rng):
        x = rng.normal(size=(20, 3))
        np.testing.assert_array_equal(poly_filter(er20, [1.0], x), x)

    def test_ring_example(self):
        np.testing.assert_array_equal(poly_filter(ring_graph(4), [1, 1], [1.0, 0, 0, 0]), [1, 1, 0, 0])

    def test_square(self, er20, rng):
        x = rng.normal(size=20)
        np.testing.assert_allclose(poly_filter(er20, [0, 0, 1], x), shift(er20, shift(er20, x)),
                                   rtol=0, atol=1e-12)

    def test_degree_bound(self):
        with pytest.raises(DegreeError):
            poly_filter(ring_graph(3), [1, 1, 1, 1], np.ones(3))

    def test_coefficients_must_be_finite(self):
        with pytest.raises(Exception):
            FilterCoeffs([1.0, float("inf")])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 15), st.booleans(), st.integers(0, 2**32))
    def test_matches_dense_powers(self, n, directed, seed):
        rng = make_rng(seed)
        g = random_graph(rng, n, directed)
        alpha = rng.normal(size=int(rng.integers(1, n + 1)))
        x = rng.normal(size=(n, 2))
        np.testing.assert_allclose(poly_filter(g, alpha, x), dense_poly(g.dense(), alpha, x),
                                   rtol=1e-10, atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 20), st.integers(0, 2**32))
    def test_composition_is_product(self, n, seed):
        rng = make_rng(seed)
        g = random_graph(rng, n, directed=bool(rng.integers(2)))
        ka = int(rng.integers(0, (n - 1) // 2 + 1))
        kb = int(rng.integers(0, n - 1 - ka + 1))
        a, b = rng.normal(size=ka + 1), rng.normal(size=kb + 1)
        x = rng.normal(size=(n, 2))
        np.testing.assert_allclose(poly_filter(g, b, poly_filter(g, a, x)),
                                   poly_filter(g, polymul(a, b), x), rtol=1e-9, atol=1e-9)

    def test_permutation_equivariance_100(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 25))
            g = random_graph(rng, n, directed=bool(rng.integers(2)))
            p = Permutation.random(n, int(rng.integers(1 << 30)))
            alpha = rng.normal(size=int(rng.integers(1, min(n, 4) + 1)))
            x = rng.normal(size=(n, 3))
            lhs = poly_filter(permute(g, p), alpha, permute_signal(x, p))
            rhs = permute_signal(poly_filter(g, alpha, x), p)
            np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10)


class TestSpectrum:
    def test_ring4_roots_of_unity(self):
        lam = spectrum(ring_graph(4)).eigenvalues
        for r in (1, 1j, -1, -1j):
            assert np.min(np.abs(lam - r)) < 1e-8

    def test_identity_reconstructs_and_flags(self):
        with pytest.warns(RepeatedSpectrumWarning):
            s = spectrum(identity_graph(4))
        assert s.repeated
        np.testing.assert_allclose(s.eigenvalues, 1)
        np.testing.assert_allclose(s.reconstruct(), np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    def test_ring_gft_rows_are_dft_rows(self, n):
        s = spectrum(ring_graph(n))
        f = dft_matrix(n)
        # each GFT row is a scaled DFT row: |<row, dft_row>| = |row| |dft_row| for some dft row
        for row in s.gft:
            cos = np.abs(f.conj() @ row) / (np.linalg.norm(row) * 1.0)
            assert cos.max() == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    def test_ring_spectrum_and_dft_diagonalization(self, n):
        lam = spectrum(ring_graph(n)).eigenvalues
        roots = np.exp(2j * np.pi * np.arange(n) / n)
        assert max(np.min(np.abs(lam - r)) for r in roots) < 1e-8
        f = dft_matrix(n)
        a = ring_graph(n).dense()
        d = f @ a @ f.conj().T
        np.testing.assert_allclose(d, np.diag(np.diag(d)), atol=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 20), st.booleans(), st.integers(0, 2**32))
    def test_inverse_pair_and_reconstruction(self, n, directed, seed):
        g = random_graph(make_rng(seed), n, directed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RepeatedSpectrumWarning)
            s = spectrum(g)
        if s.repeated or s.condition_estimate > 1e6:
            return
        np.testing.assert_allclose(s.igft @ s.gft, np.eye(n), atol=1e-8)
        np.testing.assert_allclose(s.reconstruct(), g.dense(), atol=1e-8)


class TestSpectralFilter:
    def test_identity_filter(self, er20, rng):
        x = rng.normal(size=(20, 2))
        np.testing.assert_allclose(spectral_filter(spectrum(er20), [1.0], x), x, atol=1e-8)

    def test_matches_vertex_domain_n12(self, rng):
        g = random_graph(rng, 12, p=0.4)
        alpha = rng.normal(size=4)
        x = rng.normal(size=(12, 3))
        np.testing.assert_allclose(spectral_filter(spectrum(g), alpha, x), poly_filter(g, alpha, x),
                                   atol=1e-8)

    def test_ring8_shift(self, rng):
        x = rng.normal(size=8)
        np.testing.assert_allclose(spectral_filter(spectrum(ring_graph(8)), [0, 1], x), np.roll(x, 1),
                                   atol=1e-8)

    def test_defective_matrix_raises(self):
        # nilpotent Jordan block: eig returns a singular basis
        g = Graph.from_edges(3, [(0, 1), (1, 2)], directed=True)
        with pytest.raises(NumericError):
            spectrum(g)

    def test_large_imaginary_residue_raises(self):
        s = spectrum(ring_graph(4))
        bad = Spectrum(s.eigenvalues, s.gft, s.igft * 1j, s.condition_estimate, s.min_gap,
                       s.repeated, s.symmetric)
        with pytest.raises(DualityError):
            spectral_filter(bad, [1.0], np.array([1.0, 2.0, 3.0, 4.0]))


class TestGft:
    def test_round_trip(self, er20, rng):
        s = spectrum(er20)
        x = rng.normal(size=20)
        np.testing.assert_allclose(igft_apply(s, gft_apply(s, x)).real, x, atol=1e-8)

    def test_constant_on_ring_concentrates_on_unit_eigenvalue(self):
        s = spectrum(ring_graph(6))
        xhat = gft_apply(s, np.ones(6))
        k = int(np.argmin(np.abs(s.eigenvalues - 1)))
        others = np.delete(xhat, k)
        assert abs(xhat[k]) > 1 and np.max(np.abs(others)) < 1e-8

    def test_zero(self, er20):
        assert not np.any(gft_apply(spectrum(er20), np.zeros(20)))

    def test_shape(self, er20):
        with pytest.raises(ShapeError):
            gft_apply(spectrum(er20), np.zeros(3))
