from math import factorial, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import eval_hermite

from quadobs.errors import EmptySubspace
from quadobs.hermite import (SpectralSubspaceFunction, bernstein_constant, bernstein_lhs,
                             decay_bound_factor, enumerate_modes, fourier_conjugate,
                             fourier_transform_symbol, gauss_hermite, hermite_functions,
                             partial_fourier_map, quadrature_norm2, sample_subspace,
                             weighted_decay_norm, weyl_galerkin)
from quadobs.symbols import build_symbol, kolmogorov_spec, ou_symbol, oscillator_symbol


def hermite_closed_form(n, x):
    return eval_hermite(n, x) * np.exp(-x * x / 2) / sqrt(2.0 ** n * factorial(n) * sqrt(pi))


def d_matrix(size):
    """d/dx on h_0..h_{size-1}: h_n' = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1}."""
    D = np.zeros((size, size))
    for n in range(size):
        if n > 0:
            D[n - 1, n] = sqrt(n / 2)
        if n + 1 < size:
            D[n + 1, n] = -sqrt((n + 1) / 2)
    return D


def x_matrix(size):
    X = np.zeros((size, size))
    for n in range(size):
        if n > 0:
            X[n - 1, n] = sqrt(n / 2)
        if n + 1 < size:
            X[n + 1, n] = sqrt((n + 1) / 2)
    return X


def h1(n, k):
    v = np.zeros(k)
    v[n] = 1
    return v


def test_hermite_functions_match_closed_form():
    x = np.linspace(-6, 6, 41)
    H = hermite_functions(12, x)
    for n in range(13):
        assert np.allclose(H[n], hermite_closed_form(n, x), atol=1e-13)


def test_mode_gram_is_identity():
    x, w = gauss_hermite(80)
    H = hermite_functions(30, x) * np.exp(x * x / 2)
    G = (H * w) @ H.T
    assert np.allclose(G, np.eye(31), atol=1e-10)


def test_enumerate_modes():
    modes = enumerate_modes(2, 6)
    assert len(modes) == 6
    assert all(m.eigenvalue <= 6 for m in modes)
    assert enumerate_modes(2, 1) == []


# Weyl-Galerkin

def test_harmonic_galerkin_diagonal():
    G = weyl_galerkin(build_symbol(1, {((0,), (2,)): -1, ((2,), (0,)): -1}), 10)
    assert np.allclose(G.matrix, np.diag(-(2 * np.arange(11) + 1)))
    assert np.allclose(G.leakage, 0)


def test_laplacian_galerkin_is_derivative_squared():
    N = 9
    D = d_matrix(N + 3)
    G = weyl_galerkin(build_symbol(1, {((0,), (2,)): -1}), N)
    assert np.allclose(G.matrix, (D @ D)[:N + 1, :N + 1], atol=1e-13)
    assert np.allclose(G.coupling, (D @ D)[N + 1:N + 3, :N + 1], atol=1e-13)


def test_kolmogorov_galerkin_parts():
    # symbol -xi_2^2 + i x_2 xi_1 quantizes to d_2^2 + x_2 d_1
    N = 8
    A = weyl_galerkin(ou_symbol(kolmogorov_spec(1)), N)
    size = N + 3
    D, X = d_matrix(size), x_matrix(size)
    Id = np.eye(size)
    full_herm = np.kron(Id, D @ D)
    full_skew = np.kron(D, X)
    idx = [k[0] * size + k[1] for k in A.basis]
    herm = (A.matrix + A.matrix.conj().T) / 2
    skew = (A.matrix - A.matrix.conj().T) / 2
    assert np.allclose(herm, full_herm[np.ix_(idx, idx)], atol=1e-12)
    assert np.allclose(skew, full_skew[np.ix_(idx, idx)], atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_spectrum_additivity(d):
    A = weyl_galerkin(oscillator_symbol(d, tuple(range(d)), tuple(range(d))), 6)
    expected = -np.array([2 * sum(k) + d for k in A.basis])
    assert np.allclose(A.matrix, np.diag(expected))


@pytest.mark.parametrize("q", [build_symbol(1, {((0,), (2,)): -1}), ou_symbol(kolmogorov_spec(1))],
                         ids=["laplacian", "kolmogorov"])
def test_state_leakage_halves_when_cut_doubles(q):
    out = []
    for N in (12, 24):
        A = weyl_galerkin(q, N)
        g = np.zeros(A.size)
        g[0] = 1
        out.append(A.state_leakage(expm(0.5 * A.matrix) @ g))
    assert out[1] <= out[0] / 2


# partial Fourier reduction

def test_partial_fourier_map():
    assert partial_fourier_map((0,), (1,)) == ((), (0, 1))
    assert partial_fourier_map((0, 1), (0, 1)) == ((0, 1), (0, 1))


def test_fourier_conjugation_of_potential():
    N = 10
    q = build_symbol(1, {((2,), (0,)): -1})
    G = weyl_galerkin(q, N)
    Gt = weyl_galerkin(fourier_transform_symbol(q, (0,)), N)
    conj = fourier_conjugate(G.matrix, G.basis, (0,))
    assert np.allclose(Gt.matrix, conj, atol=1e-12)
    D = d_matrix(N + 3)
    assert np.allclose(Gt.matrix, (D @ D)[:N + 1, :N + 1], atol=1e-12)


@given(st.integers(0, 10_000))
def test_fourier_conjugation_preserves_singular_values(seed):
    rng = np.random.default_rng(seed)
    q = build_symbol(2, {((0, 0), (2, 0)): -1, ((0, 2), (0, 0)): -1 + 0j,
                         ((1, 0), (0, 1)): 1j * rng.standard_normal(),
                         ((0, 0), (1, 1)): 1j * rng.standard_normal()})
    G = weyl_galerkin(q, 6)
    conj = fourier_conjugate(G.matrix, G.basis, (0,))
    s1 = np.linalg.svd(G.matrix, compute_uv=False)
    s2 = np.linalg.svd(conj, compute_uv=False)
    assert np.allclose(s1, s2, atol=1e-10)


@given(st.integers(0, 10_000))
def test_fourier_symbol_matches_conjugated_matrix(seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(3)
    q = build_symbol(2, {((2, 0), (0, 0)): -1 - abs(c[0]), ((0, 0), (0, 2)): -1,
                         ((1, 0), (1, 0)): 1j * c[1], ((0, 1), (1, 0)): 1j * c[2]})
    G = weyl_galerkin(q, 5)
    Gt = weyl_galerkin(fourier_transform_symbol(q, (0,)), 5)
    assert np.allclose(Gt.matrix, fourier_conjugate(G.matrix, G.basis, (0,)), atol=1e-12)


# spectral-subspace samples

def test_sample_one_dimensional_subspace():
    f = sample_subspace(1, (0,), 1, seed=3)
    assert f.coeffs.shape == (1, 1) and abs(f.coeffs[0, 0]) > 0


def test_sample_band_constraint():
    f = sample_subspace(2, (0,), 3, seed=1, box=20.0)
    for mode, eta, c in f.terms():
        assert float(np.sum(eta ** 2)) <= 3 - (2 * mode[0] + 1) + 1e-12


def test_sample_empty_subspace():
    with pytest.raises(EmptySubspace):
        sample_subspace(2, (0, 1), 1.5, seed=0)


def test_derivative_against_finite_differences():
    f = sample_subspace(2, (0,), 7, seed=5, n_freq=4)
    p = np.array([[0.3, -1.2], [1.1, 0.4]])
    h = 1e-5
    for alpha, e in (((1, 0), [h, 0]), ((0, 1), [0, h])):
        fd = (f(p + e) - f(p - e)) / (2 * h)
        assert np.allclose(f.derivative(alpha)(p), fd, atol=1e-6)


def test_quadrature_matches_parseval():
    f = sample_subspace(2, (0,), 9, seed=2)
    assert np.isclose(quadrature_norm2(f), f.coefficient_norm2(), rtol=1e-12)


def h_fn(n):
    C = np.zeros((n + 1, 1))
    C[n, 0] = 1
    return SpectralSubspaceFunction(1, (0,), C, np.zeros((1, 0), int), 20.0, 2 * n + 1)


def test_bernstein_order_zero():
    f = sample_subspace(1, (0,), 9, seed=0)
    assert np.isclose(bernstein_lhs(f, 0), quadrature_norm2(f))


def test_bernstein_h0_first_order():
    assert np.isclose(bernstein_lhs(h_fn(0), 1), 0.5, atol=1e-14)


def test_bernstein_h1_second_order():
    # ||h_1''||^2 / 2! by direct integration of (x^3 - 3x) exp(-x^2/2) sqrt2 pi^{-1/4}
    val, _ = quad(lambda x: 2 / sqrt(pi) * (x ** 3 - 3 * x) ** 2 * np.exp(-x * x), -np.inf, np.inf)
    assert np.isclose(bernstein_lhs(h_fn(1), 2), val / 2, rtol=1e-12)
    assert bernstein_lhs(h_fn(1), 2) <= bernstein_constant(2, 3) / 2


def test_bernstein_constant_value():
    assert bernstein_constant(2, 3) == 60


@given(st.integers(1, 2), st.booleans(), st.integers(3, 21), st.integers(0, 10_000))
def test_bernstein_property(d, partial, lam, seed):
    I = (0,) if partial and d == 2 else tuple(range(d))
    if lam < len(I):
        return
    f = sample_subspace(d, I, lam, seed=seed, n_freq=6)
    norm = quadrature_norm2(f)
    for m in range(1, 5):
        assert bernstein_lhs(f, m) <= bernstein_constant(m, lam) / factorial(m) * norm * (1 + 1e-6)


def test_weighted_norm_gaussian_closed_form():
    assert np.isclose(weighted_decay_norm(h_fn(0)), 1 / sqrt(1 - 1 / 32), rtol=1e-12)


def test_weighted_norm_zero():
    f = h_fn(0)
    z = SpectralSubspaceFunction(1, (0,), 0 * f.coeffs, f.freqs, 20.0, 1.0)
    assert weighted_decay_norm(z) == 0


def test_weighted_norm_partial_sample():
    f = sample_subspace(2, (0,), 5, seed=4)
    assert weighted_decay_norm(f) <= decay_bound_factor(1, 5) * quadrature_norm2(f)


@given(st.integers(1, 2), st.integers(1, 21), st.integers(0, 10_000))
def test_weighted_norm_property(d, lam, seed):
    I = tuple(range(d))
    if lam < d:
        return
    f = sample_subspace(d, I, lam, seed=seed)
    assert weighted_decay_norm(f) <= decay_bound_factor(d, lam) * quadrature_norm2(f)
