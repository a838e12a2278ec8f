"""Hermite functions, Weyl-Galerkin matrices and spectral-subspace samples.

The Hermite functions ``h_n`` are the L2-normalized eigenfunctions of
``-d^2/dx^2 + x^2`` (eigenvalue ``2n + 1``).  Tensor products over the
oscillator directions ``I`` combined with trigonometric sums over the
remaining (free) directions represent elements of spectral subspaces of
partial harmonic oscillators; the free directions live on a periodic box
``[-X, X)``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import factorial, pi, sqrt
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_hermite

from .errors import EmptySubspace, QuadratureUnreliable
from .symbols import QuadraticSymbol

PI_M14 = pi ** -0.25


# ---------------------------------------------------------------------------
# one-dimensional Hermite functions

def hermite_functions(nmax, x):
    """Values ``h_0(x), ..., h_nmax(x)`` as an array of shape (nmax+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = PI_M14 * np.exp(-x * x / 2)
    if nmax > 0:
        out[1] = sqrt(2.0) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = sqrt(2.0 / (n + 1)) * x * out[n] - sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_polys(nmax, x):
    """``e^{x^2/2} h_n(x)``: the polynomial factors, free of under/overflow."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = PI_M14
    if nmax > 0:
        out[1] = sqrt(2.0) * x * PI_M14
    for n in range(1, nmax):
        out[n + 1] = sqrt(2.0 / (n + 1)) * x * out[n] - sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_eval(n, x):
    return hermite_functions(n, x)[n]


def ladder_position(n):
    """Coefficients of ``x h_n`` as ``{index: coefficient}``."""
    out = {n + 1: sqrt((n + 1) / 2)}
    if n > 0:
        out[n - 1] = sqrt(n / 2)
    return out


def ladder_derivative(n):
    """Coefficients of ``h_n'`` as ``{index: coefficient}``."""
    out = {n + 1: -sqrt((n + 1) / 2)}
    if n > 0:
        out[n - 1] = sqrt(n / 2)
    return out


def position_matrix(size):
    """Matrix of multiplication by ``x`` on ``h_0..h_{size-1}`` (truncated)."""
    off = np.sqrt(np.arange(1, size) / 2)
    return np.diag(off, -1) + np.diag(off, 1)


def derivative_matrix(size):
    """Matrix of ``d/dx`` on ``h_0..h_{size-1}`` (truncated)."""
    off = np.sqrt(np.arange(1, size) / 2)
    return np.diag(-off, -1) + np.diag(off, 1)


@lru_cache(maxsize=64)
def gauss_hermite(n):
    x, w = roots_hermite(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# ---------------------------------------------------------------------------
# mode enumeration

@dataclass(frozen=True)
class HermiteMode:
    multi_index: tuple
    eigenvalue: int


def _compositions(d, total):
    if d == 0:
        if total == 0:
            yield ()
        return
    for first in range(total, -1, -1):
        for rest in _compositions(d - 1, total - first):
            yield (first,) + rest


def multi_indices(d, max_degree):
    """Multi-indices of total degree <= max_degree, sorted by (|k|, lex)."""
    out = []
    for total in range(max_degree + 1):
        out.extend(sorted(_compositions(d, total)))
    return out


def enumerate_modes(d1, lam):
    """Modes with ``2|k| + d1 <= lam`` (empty when ``lam < d1``)."""
    if lam < d1:
        return []
    top = int(np.floor((lam - d1) / 2 + 1e-12))
    return [HermiteMode(k, 2 * sum(k) + d1) for k in multi_indices(d1, top)]


# ---------------------------------------------------------------------------
# Weyl-Galerkin matrices

@dataclass(frozen=True)
class GalerkinOperator:
    """Matrix of ``q^w`` on tensor Hermite modes of total degree <= N_cut.

    ``coupling`` holds the matrix elements into the discarded shells of
    degree ``N_cut + 1`` and ``N_cut + 2`` (rows listed in
    ``outer_basis``); ``leakage`` are its column norms.
    """

    basis: tuple
    matrix: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)
    outer_basis: tuple = field(repr=False)
    N_cut: int = 0
    symbol: Optional[QuadraticSymbol] = field(default=None, repr=False)

    @property
    def leakage(self):
        return np.linalg.norm(self.coupling, axis=0)

    @property
    def size(self):
        return len(self.basis)

    @property
    def dim(self):
        return len(self.basis[0])

    def degrees(self):
        return np.array([sum(k) for k in self.basis])

    def state_leakage(self, v):
        """Norm of the part of ``A v`` pushed past the truncation."""
        return float(np.linalg.norm(self.coupling @ v))


_UP = {"x": 1.0, "p": 1j, "d": -1.0}
_DOWN = {"x": 1.0, "p": -1j, "d": 1.0}


def _shift_operator(index, basis, direction, kind):
    """Sparse matrix of ``x_j`` ('x'), ``D_j = -i d/dx_j`` ('p') or ``d/dx_j`` ('d')."""
    n = len(basis)
    rows, cols, vals = [], [], []
    for col, k in enumerate(basis):
        kj = k[direction]
        up = k[:direction] + (kj + 1,) + k[direction + 1:]
        r = index.get(up)
        if r is not None:
            rows.append(r)
            cols.append(col)
            vals.append(sqrt((kj + 1) / 2) * _UP[kind])
        if kj > 0:
            down = k[:direction] + (kj - 1,) + k[direction + 1:]
            rows.append(index[down])
            cols.append(col)
            vals.append(sqrt(kj / 2) * _DOWN[kind])
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n))


def weyl_galerkin(q, N_cut):
    """Galerkin matrix of the Weyl quantization of ``q``.

    Mixed terms ``x_j xi_j`` are quantized as ``(x_j D_j + D_j x_j)/2``;
    all other monomials involve commuting factors.  Products are formed on
    the basis of degree ``N_cut + 2`` so every retained matrix element is
    exact.
    """
    d = q.dim
    ext = multi_indices(d, N_cut + 2)
    index = {k: i for i, k in enumerate(ext)}
    ops = {}

    def op(kind, j):
        if (kind, j) not in ops:
            ops[(kind, j)] = _shift_operator(index, ext, j, kind)
        return ops[(kind, j)]

    n_ext = len(ext)
    total = sp.csr_matrix((n_ext, n_ext), dtype=complex)
    for (alpha, beta), c in q.terms:
        factors = [("x", j) for j in range(d) for _ in range(alpha[j])]
        factors += [("p", j) for j in range(d) for _ in range(beta[j])]
        (k1, j1), (k2, j2) = factors
        A, B = op(k1, j1), op(k2, j2)
        if k1 != k2 and j1 == j2:
            term = (A @ B + B @ A) / 2
        else:
            term = A @ B
        total = total + c * term
    n_in = sum(1 for k in ext if sum(k) <= N_cut)
    dense = total[:, :n_in].toarray()
    return GalerkinOperator(tuple(ext[:n_in]), dense[:n_in], dense[n_in:],
                            tuple(ext[n_in:]), int(N_cut), q)


def monomial_operator(basis, alpha, beta):
    """Dense matrix of ``x^alpha d^beta`` from ``basis`` into the enlarged basis.

    The target basis contains all multi-indices of total degree up to
    ``max degree + |alpha| + |beta|``, so the action is exact.  Returns
    ``(matrix, target_basis)``.
    """
    d = len(basis[0])
    order = sum(alpha) + sum(beta)
    top = max(sum(k) for k in basis) + order
    ext = multi_indices(d, top)
    index = {k: i for i, k in enumerate(ext)}
    op = sp.identity(len(ext), dtype=complex, format="csr")
    for j in range(d):
        for _ in range(beta[j]):
            op = _shift_operator(index, ext, j, "d") @ op
    for j in range(d):
        for _ in range(alpha[j]):
            op = _shift_operator(index, ext, j, "x") @ op
    cols = [index[k] for k in basis]
    return op[:, cols].toarray(), tuple(ext)


def oscillator_eigenvalues(basis, I):
    """Diagonal of ``-|xi|^2 - |x|^2`` when ``I`` is all directions."""
    d = len(basis[0])
    return -np.array([2 * sum(k) + d for k in basis], dtype=float)


# ---------------------------------------------------------------------------
# partial Fourier reduction

def partial_fourier_map(I, J):
    I, J = set(I), set(J)
    return tuple(sorted(I & J)), tuple(sorted(I | J))


def fourier_phases(basis, directions):
    """Diagonal of the partial Fourier transform: ``prod_j (-i)^{k_j}``."""
    powers = np.array([sum(k[j] for j in directions) for k in basis])
    return (-1j) ** (powers % 4)


def fourier_conjugate(matrix, basis, directions):
    phase = fourier_phases(basis, directions)
    return phase[:, None] * matrix * phase.conj()[None, :]


def fourier_transform_symbol(q, directions):
    """Symbol of ``F q^w F^-1`` with ``F`` the Fourier transform in ``directions``.

    Conjugation maps ``x_j`` to ``-D_j`` and ``D_j`` to ``x_j``.
    """
    from .symbols import symbol_from_form
    d = q.dim
    L = np.eye(2 * d)
    for j in directions:
        L[j, j] = 0.0
        L[d + j, d + j] = 0.0
        L[j, d + j] = -1.0
        L[d + j, j] = 1.0
    return symbol_from_form(L.T @ q.form @ L)


# ---------------------------------------------------------------------------
# spectral-subspace functions

def bernstein_constant(m, lam):
    """``C_B(m, lam) = 2^m prod_{k<m} (lam + 2k)``."""
    out = 2.0 ** m
    for k in range(m):
        out *= lam + 2 * k
    return out


@dataclass(frozen=True)
class SpectralSubspaceFunction:
    """``f = sum_k phi_k (x) psi_k`` on ``R^{d1} x [-X, X)^{d2}``.

    ``coeffs[k..., f]`` is the coefficient of ``h_k(x_I) exp(i eta_f . y)``
    with ``eta_f = pi * freqs[f] / box``.  ``lam`` is ``None`` for derived
    functions (derivatives) that are no longer tagged with a threshold.
    """

    dim: int
    I: tuple
    coeffs: np.ndarray = field(repr=False)
    freqs: np.ndarray = field(repr=False)
    box: float = 20.0
    lam: Optional[float] = None

    @property
    def free(self):
        return tuple(j for j in range(self.dim) if j not in self.I)

    @property
    def d1(self):
        return len(self.I)

    @property
    def etas(self):
        return np.pi * self.freqs / self.box

    @property
    def max_degree(self):
        if self.d1 == 0:
            return 0
        return int(sum(s - 1 for s in self.coeffs.shape[:-1]))

    def terms(self):
        """Nonzero (mode, eta, coefficient) triples."""
        etas = self.etas
        out = []
        for idx in zip(*np.nonzero(self.coeffs)):
            out.append((tuple(int(i) for i in idx[:-1]), etas[idx[-1]], self.coeffs[idx]))
        return out

    def derivative(self, alpha):
        """Exact ``d^alpha f``: ladder action in ``I``, Fourier factors elsewhere."""
        C = self.coeffs
        for axis, j in enumerate(self.I):
            for _ in range(alpha[j]):
                pad = [(0, 0)] * C.ndim
                pad[axis] = (0, 1)
                C = np.pad(C, pad)
                D = derivative_matrix(C.shape[axis])
                C = np.moveaxis(np.tensordot(D, C, axes=([1], [axis])), 0, axis)
        factor = np.ones(len(self.freqs), dtype=complex)
        etas = self.etas
        for col, j in enumerate(self.free):
            factor = factor * (1j * etas[:, col]) ** alpha[j]
        return SpectralSubspaceFunction(self.dim, self.I, C * factor, self.freqs,
                                        self.box, None)

    def __call__(self, points):
        """Evaluate at points of shape (n, d)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        vals = self.coeffs.reshape(-1, len(self.freqs)).astype(complex)
        basis = np.ones((points.shape[0], vals.shape[0]))
        if self.d1:
            tables = [hermite_functions(s - 1, points[:, j])
                      for s, j in zip(self.coeffs.shape[:-1], self.I)]
            basis = np.ones((points.shape[0],) + self.coeffs.shape[:-1])
            for axis, tab in enumerate(tables):
                shape = [points.shape[0]] + [1] * self.d1
                shape[axis + 1] = tab.shape[0]
                basis = basis * tab.T.reshape(shape)
            basis = basis.reshape(points.shape[0], -1)
        if self.free:
            y = points[:, list(self.free)]
            waves = np.exp(1j * y @ self.etas.T)
        else:
            waves = np.ones((points.shape[0], 1))
        return np.einsum("pk,kf,pf->p", basis, vals, waves)

    def coefficient_norm2(self):
        """Parseval value of ``||f||^2`` on ``R^{d1} x [-X, X)^{d2}``."""
        return float(np.sum(np.abs(self.coeffs) ** 2) * (2 * self.box) ** len(self.free))

    def to_document(self):
        idx = np.argwhere(self.coeffs != 0)
        modes = [[int(v) for v in row[:-1]] for row in idx]
        freqs = [[int(v) for v in self.freqs[row[-1]]] for row in idx]
        coeffs = [[float(self.coeffs[tuple(row)].real), float(self.coeffs[tuple(row)].imag)]
                  for row in idx]
        return {"dim": self.dim, "I": [i + 1 for i in self.I], "box": self.box,
                "lambda": self.lam, "modes": modes, "freqs": freqs, "coeffs": coeffs}


def _lattice_ball(d2, radius):
    r = int(np.floor(radius + 1e-12))
    pts = np.array(list(product(range(-r, r + 1), repeat=d2)), dtype=int).reshape(-1, d2)
    return pts[np.sum(pts ** 2, axis=1) <= radius ** 2 + 1e-9]


def sample_subspace(dim, I, lam, seed, box=20.0, n_freq=None):
    """Random element of ``Ran P_lam`` of ``H_I`` (Laplacian in all directions).

    Coefficients are standard complex Gaussians on every admissible
    (mode, frequency) pair; frequencies lie on ``pi/X Z^{d2}`` with
    ``|eta|^2 <= lam - mu_k``.  With ``n_freq`` set, each mode keeps at
    most ``n_freq`` randomly chosen admissible frequencies.
    """
    I = tuple(sorted(I))
    d1 = len(I)
    d2 = dim - d1
    modes = enumerate_modes(d1, lam)
    if not modes:
        raise EmptySubspace(f"no oscillator mode with eigenvalue <= {lam}")
    rng = np.random.default_rng(seed)
    if d2:
        freqs = _lattice_ball(d2, sqrt(lam - d1) * box / pi)
    else:
        freqs = np.zeros((1, 0), dtype=int)
    etas2 = np.sum((np.pi * freqs / box) ** 2, axis=1)
    top = max(sum(m.multi_index) for m in modes)
    shape = (top + 1,) * d1 + (len(freqs),)
    C = np.zeros(shape, dtype=complex)
    for mode in modes:
        ok = np.nonzero(etas2 <= lam - mode.eigenvalue + 1e-12)[0]
        if n_freq is not None and len(ok) > n_freq:
            ok = np.sort(rng.choice(ok, size=n_freq, replace=False))
        z = rng.standard_normal((len(ok), 2)) @ np.array([1.0, 1j]) / sqrt(2)
        C[mode.multi_index + (slice(None),)][ok] = z
    return SpectralSubspaceFunction(dim, I, C, freqs, float(box), float(lam))


def _quadrature_grid(f, n_gh=None):
    """Nodes/weights reproducing ``||g||^2`` exactly for g built from ``f``'s data."""
    deg = max(f.coeffs.shape[:-1], default=1) - 1 if f.d1 else 0
    n_gh = n_gh or max(64, 4 * max(deg, 1))
    fmax = int(np.max(np.abs(f.freqs), initial=0))
    n_box = max(16, 2 * fmax + 2)
    return n_gh, n_box


def _values_on_grid(f, n_gh, n_box, scale=1.0):
    """Samples of ``f`` with Gaussian factor stripped in ``I``.

    Returns ``(values, weights)`` with ``sum(weights * |values|^2)`` equal
    to ``int |f|^2 exp((1 - scale) |x_I|^2)``.
    """
    x, w = gauss_hermite(n_gh)
    xs = x / sqrt(scale)
    C = f.coeffs
    for axis in range(f.d1):
        P = hermite_polys(C.shape[axis] - 1, xs)
        C = np.moveaxis(np.tensordot(P.T, C, axes=([1], [axis])), 0, axis)
    weights = np.ones(())
    for _ in range(f.d1):
        weights = np.multiply.outer(weights, w / sqrt(scale))
    if f.free:
        y = -f.box + 2 * f.box * np.arange(n_box) / n_box
        grids = np.meshgrid(*([y] * len(f.free)), indexing="ij")
        Y = np.stack([g.ravel() for g in grids], axis=1)
        W = np.exp(1j * Y @ f.etas.T)
        vals = np.tensordot(C, W, axes=([C.ndim - 1], [1]))
        wy = np.full(Y.shape[0], (2 * f.box / n_box) ** len(f.free))
        weights = np.multiply.outer(weights, wy)
    else:
        vals = C[..., 0]
    return vals, weights


def quadrature_norm2(f, n_gh=None):
    n_gh, n_box = _quadrature_grid(f, n_gh)
    vals, weights = _values_on_grid(f, n_gh, n_box)
    return float(np.sum(weights * np.abs(vals) ** 2))


def bernstein_lhs(f, m, details=False):
    """``sum_{|alpha|=m} ||d^alpha f||^2 / alpha!`` by quadrature.

    With ``details`` a dict also reports the Parseval cross-check of the
    quadrature (relative difference) as ``quadrature_error``.
    """
    total = 0.0
    parseval = 0.0
    for alpha in _compositions(f.dim, m):
        g = f.derivative(alpha)
        weight = 1.0 / np.prod([factorial(a) for a in alpha])
        total += weight * quadrature_norm2(g)
        parseval += weight * g.coefficient_norm2()
    if details:
        err = abs(total - parseval) / parseval if parseval else abs(total)
        return total, {"parseval": parseval, "quadrature_error": err}
    return total


def weighted_decay_norm(f, rtol=1e-6):
    """``int exp(|x_I|^2 / (32 d1)) |f|^2``.

    The weight is absorbed into a rescaled Gauss-Hermite rule, which is
    exact for these integrands; a doubled rule is still compared against
    and a disagreement beyond ``rtol`` raises :class:`QuadratureUnreliable`.
    """
    if f.d1 == 0:
        return quadrature_norm2(f)
    scale = 1.0 - 1.0 / (32 * f.d1)
    n_gh, n_box = _quadrature_grid(f)
    vals = []
    for n in (n_gh, 2 * n_gh):
        v, w = _values_on_grid(f, n, n_box, scale)
        vals.append(float(np.sum(w * np.abs(v) ** 2)))
    a, b = vals
    if abs(a - b) > rtol * max(abs(b), 1e-300):
        raise QuadratureUnreliable(f"weighted norm refinement mismatch {a} vs {b}")
    return b


def decay_bound_factor(d1, lam):
    """``2^{2(d1+1)+lam}``."""
    return 2.0 ** (2 * (d1 + 1) + lam)
