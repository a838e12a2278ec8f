"""Empirical constants for spectral inequalities, bound evaluators, and
dissipation / smoothing experiments on Galerkin matrices."""
from dataclasses import dataclass, field
from math import e as E_CONST, exp, factorial, log, log10, sqrt
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh, expm
from scipy.optimize import brentq

from .errors import (ConfigInvalid, HypothesisViolated, LeakageExceeded, NonContraction,
                     ParameterOutOfRange, QuadratureUnreliable, UnsupportedShape)
from .hermite import (HermiteMode, _lattice_ball, enumerate_modes, hermite_functions,
                      monomial_operator, weyl_galerkin)
from .sensors import _fourier_interval_gram, unit_ball_volume, verify_decay
from .symbols import detect_product, oscillator_symbol, singular_space

LOG10E = log10(E_CONST)


# ---------------------------------------------------------------------------
# Gram matrices

def _mode_array(modes):
    return np.array([m.multi_index if isinstance(m, HermiteMode) else tuple(m) for m in modes],
                    dtype=int).reshape(len(modes), -1)


def _interval_tables(a, b, n, nmax):
    """Composite Gauss-Legendre on ``[a, b]`` (unit-length panels) with Hermite tables."""
    x, w = leggauss(n)
    panels = max(1, int(np.ceil(b - a)))
    edges = np.linspace(a, b, panels + 1)
    xs = np.concatenate([(v - u) / 2 * x + (u + v) / 2 for u, v in zip(edges[:-1], edges[1:])])
    ws = np.concatenate([(v - u) / 2 * w for u, v in zip(edges[:-1], edges[1:])])
    return hermite_functions(nmax, xs), ws


def _interval_gram(a, b, n, nmax):
    H, w = _interval_tables(a, b, n, nmax)
    return (H * w) @ H.T


def _gram_pass(K, omega, R, n):
    nmax = int(K.max(initial=0))
    d = K.shape[1]
    lo, hi = np.full(d, -R), np.full(d, R)
    M = np.zeros((len(K), len(K)))
    pieces = omega.pieces(lo, hi)
    if pieces is None:
        # indicator sets: tensor rule with a membership mask
        H, w = _interval_tables(-R, R, n, nmax)
        nodes = _composite_nodes(-R, R, n)
        grids = np.meshgrid(*([nodes] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        mask = omega.contains(pts).astype(float)
        W = np.ones(())
        for _ in range(d):
            W = np.multiply.outer(W, w)
        Phi = np.ones((len(K), len(pts)))
        for a in range(d):
            tab = H[:, np.indices([len(nodes)] * d).reshape(d, -1)[a]]
            Phi = Phi * tab[K[:, a]]
        return (Phi * (W.ravel() * mask)) @ Phi.T
    balls = []
    for kind, c, s in pieces:
        if kind == "box":
            a, b = np.maximum(c, lo), np.minimum(s, hi)
            if np.any(b <= a):
                continue
            block = np.ones((len(K), len(K)))
            for ax in range(d):
                G = _interval_gram(a[ax], b[ax], n, nmax)
                block = block * G[np.ix_(K[:, ax], K[:, ax])]
            M += block
        elif d == 1:
            G = _interval_gram(max(c[0] - s, -R), min(c[0] + s, R), n, nmax)
            M += G[np.ix_(K[:, 0], K[:, 0])]
        elif d == 2:
            balls.append((c, s))
        else:
            raise UnsupportedShape("ball pieces are integrated only in d <= 2")
    if balls:
        xr, wr = leggauss(n)
        nth = 2 * n
        th = 2 * np.pi * np.arange(nth) / nth
        for start in range(0, len(balls), 256):
            pts, wts = [], []
            for c, s in balls[start:start + 256]:
                r = s * (xr + 1) / 2
                rr, tt = np.meshgrid(r, th, indexing="ij")
                pts.append(np.stack([c[0] + rr * np.cos(tt), c[1] + rr * np.sin(tt)], -1).reshape(-1, 2))
                wts.append((np.outer(wr * s / 2 * r, np.full(nth, 2 * np.pi / nth))).ravel())
            pts = np.concatenate(pts)
            wts = np.concatenate(wts)
            Phi = np.ones((len(K), len(pts)))
            for ax in range(2):
                Phi = Phi * hermite_functions(nmax, pts[:, ax])[K[:, ax]]
            M += (Phi * wts) @ Phi.T
    return M


def _composite_nodes(a, b, n):
    x, _ = leggauss(n)
    panels = max(1, int(np.ceil(b - a)))
    edges = np.linspace(a, b, panels + 1)
    return np.concatenate([(v - u) / 2 * x + (u + v) / 2 for u, v in zip(edges[:-1], edges[1:])])


def gram_matrix(modes, omega, n_nodes=None, tol=1e-8, radius=None):
    """``M_jk = <phi_j, 1_omega phi_k>`` for tensor Hermite functions.

    Integration runs over ``[-R, R]^d`` with ``R = sqrt(2 n_max + 1) + 12``
    (the discarded tail is below double precision), piecewise over the
    elementary pieces of ``omega``.  The rule is repeated with twice the
    nodes; a change above ``tol`` raises :class:`QuadratureUnreliable`.
    """
    K = _mode_array(modes)
    if len(K) == 0:
        return np.zeros((0, 0))
    nmax = int(K.max(initial=0))
    R = radius if radius is not None else sqrt(2 * nmax + 1) + 12
    n = n_nodes or max(32, nmax + 16)
    M1 = _gram_pass(K, omega, R, n)
    M2 = _gram_pass(K, omega, R, 2 * n)
    err = float(np.max(np.abs(M1 - M2), initial=0.0))
    if err > tol:
        raise QuadratureUnreliable(f"Gram node doubling changed entries by {err:.2e}")
    return (M2 + M2.T) / 2


def frame_modes(dim, I, lam, box=20.0):
    """Oscillator modes times lattice frequencies with ``mu_k + |eta|^2 <= lam``."""
    I = tuple(sorted(I))
    d1, d2 = len(I), dim - len(I)
    modes = enumerate_modes(d1, lam)
    freqs = _lattice_ball(d2, sqrt(max(lam - d1, 0)) * box / np.pi)
    etas2 = np.sum((np.pi * freqs / box) ** 2, axis=1)
    out = []
    for m in modes:
        for f in np.nonzero(etas2 <= lam - m.eigenvalue + 1e-12)[0]:
            out.append((m.multi_index, tuple(int(v) for v in freqs[f])))
    return out


def frame_gram_matrix(frame, omega, I, box=20.0, n_nodes=None):
    """Gram matrix on ``h_k(x_I) exp(i eta . y) / sqrt(2X)^{d2}`` over the periodic box.

    Only sets made of axis boxes are supported here.
    """
    I = tuple(sorted(I))
    free = [j for j in range(omega.dim) if j not in I]
    K = np.array([k for k, _ in frame], dtype=int).reshape(len(frame), len(I))
    F = np.array([f for _, f in frame], dtype=int).reshape(len(frame), len(free))
    etas = np.pi * F / box
    nmax = int(K.max(initial=0))
    R = sqrt(2 * nmax + 1) + 12
    lo = np.empty(omega.dim)
    hi = np.empty(omega.dim)
    lo[list(I)], hi[list(I)] = -R, R
    lo[free], hi[free] = -box, box
    pieces = omega.pieces(lo, hi)
    if pieces is None or any(p[0] != "box" for p in pieces):
        raise UnsupportedShape("frame Gram matrices need box pieces")
    n = n_nodes or max(32, nmax + 16)
    M = np.zeros((len(frame), len(frame)), dtype=complex)
    for _, c, s in pieces:
        a, b = np.maximum(c, lo), np.minimum(s, hi)
        if np.any(b <= a):
            continue
        block = np.ones_like(M)
        for ax, j in enumerate(I):
            G = _interval_gram(a[j], b[j], n, nmax)
            block = block * G[np.ix_(K[:, ax], K[:, ax])]
        for col, j in enumerate(free):
            block = block * _fourier_interval_gram(etas[:, col], a[j], b[j]).T / (2 * box)
        M += block
    return (M + M.conj().T) / 2


# ---------------------------------------------------------------------------
# bound evaluators (log10 values)

def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise ParameterOutOfRange("gamma must lie in (0, 1)")


def _check_common(L, d, lam, K):
    if L <= 0 or d < 1 or lam < 1 or K < 1:
        raise ParameterOutOfRange("need L > 0, d >= 1, lambda >= 1, K >= 1")


def bound_decay_cubes(gamma, a, L, d, lam, K=10.0):
    """log10 of ``3 (gamma/K^d)^{K d^{1+a} (1+L)^2 lam^{(1+a)/2}}``."""
    _check_gamma(gamma)
    _check_common(L, d, lam, K)
    if not 0 <= a < 1:
        raise ParameterOutOfRange("a must lie in [0, 1)")
    expo = K * d ** (1 + a) * (1 + L) ** 2 * lam ** ((1 + a) / 2)
    return log10(3) + expo * (log10(gamma) - d * log10(K))


def bound_fractional(theta, gamma, a, L, d, lam, K=10.0):
    """Fractional-power variant: ``lam^{(1+a)/(2 theta)}``, needs ``theta > (1+a)/2``."""
    _check_gamma(gamma)
    _check_common(L, d, lam, K)
    if not 0 <= a < 1 or theta <= (1 + a) / 2:
        raise ParameterOutOfRange("need a in [0, 1) and theta > (1+a)/2")
    expo = K * d ** (1 + a) * (1 + L) ** 2 * lam ** ((1 + a) / (2 * theta))
    return log10(3) + expo * (log10(gamma) - d * log10(K))


def bound_hermite(gamma, a, L, d, lam, K=10.0):
    """Full harmonic oscillator: exponent ``K d^{5/2+a} (1+L)^2 lam^{(1+a)/2}``."""
    _check_gamma(gamma)
    _check_common(L, d, lam, K)
    if not 0 <= a < 1:
        raise ParameterOutOfRange("a must lie in [0, 1)")
    expo = K * d ** (2.5 + a) * (1 + L) ** 2 * lam ** ((1 + a) / 2)
    return log10(3) + expo * (log10(gamma) - d * log10(K))


def bound_kovrijkine(gamma, L, d, lam, K=10.0):
    """Laplacian on thick sets: ``(gamma/K^d)^{K d L lam^{1/2} + 2d + 6}``."""
    _check_gamma(gamma)
    _check_common(L, d, lam, K)
    expo = K * d * L * sqrt(lam) + 2 * d + 6
    return expo * (log10(gamma) - d * log10(K))


SHAPE_CLASSES = ("general", "centrally_symmetric", "cube")


def gen_denominator(d, shape_class="general"):
    if shape_class == "general":
        return 24 * 2 ** d * d ** (1 + d)
    if shape_class == "centrally_symmetric":
        return 24 * 2 ** d * d ** (1 + d / 2)
    if shape_class == "cube":
        return 24 * d ** (1 + d / 2) * unit_ball_volume(d)
    raise ParameterOutOfRange(f"unknown shape class {shape_class!r}")


def bound_gen(D, eps, a, gamma, kappa, d, lam, shape_class="general"):
    """General covering bound with bracket ``gamma / denominator``.

    The general-shape denominator carries no unit-ball volume while the
    cube one does; both are evaluated as printed.
    """
    _check_gamma(gamma)
    if D <= 0 or not 0 < eps <= 1 or a < 0 or kappa < 1 or d < 1 or lam < 1:
        raise ParameterOutOfRange("need D > 0, eps in (0, 1], a >= 0, kappa >= 1, lambda >= 1")
    expo = 7 * (1600 * E_CONST * D * (D + 1) + log(4 * sqrt(kappa))) * lam ** (1 - (eps - a) / 2)
    return log10(3 / kappa) + expo * (log10(gamma) - log10(gen_denominator(d, shape_class)))


def bound_besicovitch(gamma, a, eps, R, L, d, lam, K=10.0):
    """Besicovitch-covering bound ``3 (gamma/e)^{K^{1+a} d^{(13+3a)/2} (1+R+L)^2 lam^{1-(eps-a)/2}}``."""
    _check_gamma(gamma)
    _check_common(L, d, lam, K)
    if not 0 < eps <= 1 or not 0 <= a < eps or R < 0:
        raise ParameterOutOfRange("need eps in (0, 1], a in [0, eps), R >= 0")
    expo = K ** (1 + a) * d ** ((13 + 3 * a) / 2) * (1 + R + L) ** 2 * lam ** (1 - (eps - a) / 2)
    return log10(3) + expo * (log10(gamma) - LOG10E)


def k_min(bound, log10_empirical, K_max=1e6):
    """Smallest ``K >= 1`` with ``bound(K) <= empirical`` (bounds decrease in K)."""
    if bound(1.0) <= log10_empirical:
        return 1.0
    if bound(K_max) > log10_empirical:
        return float("inf")
    return brentq(lambda K: bound(K) - log10_empirical, 1.0, K_max, xtol=1e-10)


# ---------------------------------------------------------------------------
# spectral inequality

@dataclass(frozen=True)
class SpectralIneqReport:
    lam: float
    subspace_dim: int
    empirical_constant: float
    bound_log10: Optional[float]
    K_used: float
    K_min: Optional[float]
    decay_parameters: Optional[tuple]
    frame_relative: bool = False
    eigenvalues: np.ndarray = field(default=None, repr=False)

    @property
    def empirical_log10(self):
        return log10(self.empirical_constant) if self.empirical_constant > 0 else float("-inf")

    @property
    def ratio_log10(self):
        if self.bound_log10 is None:
            return None
        return self.empirical_log10 - self.bound_log10

    @property
    def bound_holds(self):
        return self.bound_log10 is None or self.empirical_log10 >= self.bound_log10

    def to_document(self):
        return {"lambda": self.lam, "subspace_dim": self.subspace_dim,
                "empirical": self.empirical_constant, "empirical_log10": self.empirical_log10,
                "bound_log10": self.bound_log10, "ratio_log10": self.ratio_log10,
                "K_used": self.K_used, "K_min": self.K_min,
                "decay_parameters": list(self.decay_parameters) if self.decay_parameters else None,
                "frame_relative": self.frame_relative}


def decay_parameters(omega):
    """``(gamma, a, L)`` for which the built-in sets satisfy the cell condition."""
    if omega.kind == "lattice_cubes":
        return omega.gamma, omega.a, omega.L
    if omega.kind == "thick_pattern":
        return omega.gamma, 0.0, omega.L
    if omega.kind == "lattice_balls" and omega.radius_rule is None and omega.L == 1.0:
        # cell density tau_d 2^{-d(1+sqrt|k|)} dominates gamma^{1+|k|^{1/2}}
        d = omega.dim
        return min(unit_ball_volume(d) / 2 ** d, 2.0 ** -d), 0.5, 1.0
    return None


def spectral_ineq_empirical(lam, omega, I=None, K=10.0, decay=None, box=20.0,
                            check_cells=12):
    """Smallest eigenvalue of the ``omega`` Gram matrix on ``Ran P_lam``.

    With ``I`` covering every coordinate the subspace is finite and the
    constant is exact; otherwise the free directions are restricted to
    the periodic sampling frame and the report is marked frame-relative.
    ``decay`` overrides the ``(gamma, a, L)`` used for the bound; the
    cell condition is re-verified on ``|m_j| <= check_cells``.
    """
    dim = omega.dim
    I = tuple(range(dim)) if I is None else tuple(sorted(I))
    params = decay or decay_parameters(omega)
    if params is not None and check_cells:
        g, a, L = params
        if not verify_decay(omega, L, g, a, I, check_cells if dim == 1 else min(check_cells, 4)).passed:
            raise HypothesisViolated("sensor set fails the cell-density condition")
    if len(I) == dim:
        modes = enumerate_modes(dim, lam)
        if not modes:
            raise ParameterOutOfRange("empty spectral subspace")
        M = gram_matrix(modes, omega)
        frame = False
    else:
        modes = frame_modes(dim, I, lam, box)
        M = frame_gram_matrix(modes, omega, I, box)
        frame = True
    w = eigh(M, eigvals_only=True)
    emp = float(min(max(w[0], 0.0), 1.0))
    bound = kmin = None
    if params is not None:
        g, a, L = params
        bound = bound_decay_cubes(g, a, L, dim, lam, K)
        log_emp = log10(emp) if emp > 0 else float("-inf")
        kmin = k_min(lambda k: bound_decay_cubes(g, a, L, dim, lam, k), log_emp)
    return SpectralIneqReport(float(lam), len(modes), emp, bound, float(K), kmin,
                              tuple(params) if params else None, frame, w)


# ---------------------------------------------------------------------------
# dissipation

def comparison_operator(dim, I, N_cut):
    """Galerkin matrix of ``H_I = -Laplacian + |x_I|^2`` (sign flipped from the symbol)."""
    G = weyl_galerkin(oscillator_symbol(dim, I, tuple(range(dim))), N_cut)
    return -G.matrix


def _contraction_check(E, tol=1e-8):
    n = np.linalg.norm(E, 2)
    if n > 1 + tol:
        raise NonContraction(f"semigroup norm {n:.12f} exceeds one")
    return n


@dataclass(frozen=True)
class DissipationReport:
    times: np.ndarray
    decay: np.ndarray
    seed_decay: np.ndarray
    k0: int
    lam: float
    c_hat: float
    exponent: Optional[float]
    exponent_direct: Optional[float]
    predicted_exponent: int
    dominated: bool
    leakage: float
    lam_sweep: tuple = ()
    sweep_decay: Optional[np.ndarray] = None

    def to_document(self):
        return {"k0": self.k0, "lambda": self.lam, "times": list(self.times),
                "decay": list(self.decay),
                "fit": {"c_hat": self.c_hat, "exponent": self.exponent,
                        "exponent_direct": self.exponent_direct,
                        "predicted_exponent": self.predicted_exponent,
                        "bound_dominates": self.dominated},
                "leakage": self.leakage, "lambda_sweep": list(self.lam_sweep)}

    def csv_rows(self):
        head = ("t", "decay") + tuple(f"seed{i}" for i in range(len(self.seed_decay)))
        rows = [head]
        for i, t in enumerate(self.times):
            rows.append((t, self.decay[i]) + tuple(self.seed_decay[:, i]))
        return rows


def _loglog_slope(t, y):
    ok = (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(t[ok]), np.log(y[ok]), 1)[0])


def _fit_decay(times, decay, lam, p):
    """``(c_hat, dominated, log-log exponent)`` for a decay curve."""
    x = times ** p * lam
    c_hat = -float(np.polyfit(x, np.log(np.maximum(decay, 1e-300)), 1)[0])
    dominated = bool(np.all(decay <= 2 * np.exp(-c_hat * x) * (1 + 1e-12)))
    direct = _loglog_slope(times, -np.log(np.maximum(decay, 1e-300)))
    return c_hat, dominated, direct


def dissipation_experiment(A, comparison_I, lam, seeds=(0, 1, 2), times=None, t0=1.0,
                           init_degree=None, leakage_threshold=1e-6, enforce_leakage=True,
                           lam_sweep=None, initial=None):
    """``||(1 - P_lam) T(t) g||`` against the ``t^{2k0+1} lam`` law.

    ``A`` is a :class:`GalerkinOperator`; ``P_lam`` is the spectral
    projector of the comparison operator ``H_I`` assembled on the same
    basis.  The worst-case decay over the initial subspace (modes of
    degree <= ``init_degree``, default ``N_cut - 10``) is computed by a
    singular value decomposition, alongside per-seed curves.

    Fits: ``c_hat`` is minus the least-squares slope of ``log decay``
    against ``t^{2k0+1} lam`` (with intercept); the exponent from the lambda-slope of ``-log decay``
    across ``lam_sweep`` regressed against ``t`` in log-log scale (the
    direct log-log exponent of ``-log decay`` is reported too).
    """
    I = tuple(sorted(comparison_I))
    dim = A.dim
    report = singular_space(A.symbol)
    prod = report.product
    expected_J = tuple(range(dim))
    if prod is None or prod.rotation is not None or tuple(prod.I) != I or tuple(prod.J) != expected_J:
        raise HypothesisViolated("singular space does not match the comparison operator")
    k0 = report.k0
    times = np.linspace(0.05, 0.5, 10) * t0 if times is None else np.asarray(times, float)
    deg = A.degrees()
    top = A.N_cut - 10 if init_degree is None else init_degree
    cols = np.nonzero(deg <= max(top, 0))[0]
    H = comparison_operator(dim, I, A.N_cut)
    w, V = eigh(H)
    sweep = tuple(lam_sweep) if lam_sweep else (lam,)
    if lam not in sweep:
        sweep = tuple(sorted(sweep + (lam,)))
    highs = {l: V[:, w > l + 1e-9].conj().T for l in sweep}
    if initial is None:
        G = np.zeros((len(deg), len(seeds)), dtype=complex)
        for i, s in enumerate(seeds):
            r = np.random.default_rng(s)
            G[cols, i] = r.standard_normal(len(cols)) + 1j * r.standard_normal(len(cols))
    else:
        G = np.atleast_2d(np.asarray(initial, dtype=complex).T).reshape(len(deg), -1)
    G = G / np.linalg.norm(G, axis=0)
    decay = np.empty(len(times))
    seed_decay = np.empty((G.shape[1], len(times)))
    sweep_decay = np.empty((len(sweep), len(times)))
    leak = 0.0
    for i, t in enumerate(times):
        Et = expm(t * A.matrix)
        _contraction_check(Et)
        sub = Et[:, cols]
        for j, l in enumerate(sweep):
            sweep_decay[j, i] = np.linalg.norm(highs[l] @ sub, 2)
        decay[i] = sweep_decay[sweep.index(lam), i]
        seed_decay[:, i] = np.linalg.norm(highs[lam] @ (Et @ G), axis=0)
        leak = max(leak, float(np.linalg.norm(A.coupling @ sub, 2)))
    if enforce_leakage and leak > leakage_threshold:
        raise LeakageExceeded(f"leakage {leak:.3e} above threshold {leakage_threshold:.1e}")
    p = 2 * k0 + 1
    c_hat, dominated, direct = _fit_decay(times, decay, lam, p)
    exponent = direct
    if len(sweep) >= 2:
        logs = -np.log(np.maximum(sweep_decay, 1e-300))
        slopes = np.array([np.polyfit(np.array(sweep, float), logs[:, i], 1)[0]
                           for i in range(len(times))])
        exponent = _loglog_slope(times, slopes)
    return DissipationReport(times, decay, seed_decay, k0, float(lam), c_hat, exponent, direct,
                             p, dominated, leak, sweep, sweep_decay)


# ---------------------------------------------------------------------------
# smoothing

@dataclass(frozen=True)
class SmoothingReport:
    alpha: tuple
    beta: tuple
    k0: int
    times: np.ndarray
    lhs: np.ndarray
    leakage: np.ndarray
    saturation: float
    resolved: np.ndarray
    C_hat: float
    exponent: Optional[float]
    predicted_exponent: float

    @property
    def order(self):
        return sum(self.alpha) + sum(self.beta)

    def to_document(self):
        return {"alpha": list(self.alpha), "beta": list(self.beta), "k0": self.k0,
                "times": list(self.times), "lhs": list(self.lhs), "leakage": list(self.leakage),
                "resolved": [bool(v) for v in self.resolved], "C_hat": self.C_hat,
                "exponent": self.exponent, "predicted_exponent": self.predicted_exponent}


def semigroup_table(A, times):
    """``exp(t A)`` for each ``t``, for reuse across several smoothing orders."""
    return [expm(t * A.matrix) for t in times]


def smoothing_experiment(A, alpha, beta, times=None, init_degree=None,
                         leakage_threshold=1e-6, saturation_ratio=0.5, enforce_leakage=False,
                         semigroup=None):
    """``sup ||x^alpha d^beta T(t) g|| / ||g||`` over the initial subspace.

    ``C_hat`` is the smallest constant making the smoothing inequality
    hold on the whole grid.  The t-exponent is the negative log-log slope
    over resolved grid points: optimizer leakage at most
    ``leakage_threshold`` and left side below ``saturation_ratio`` times
    its value at ``t = 0`` (there the truncation, not the semigroup,
    limits the supremum).  ``semigroup`` may hold precomputed
    :func:`semigroup_table` matrices for ``times``.
    """
    alpha, beta = tuple(alpha), tuple(beta)
    dim = A.dim
    report = singular_space(A.symbol)
    prod = report.product
    if prod is None or prod.rotation is not None:
        raise HypothesisViolated("smoothing checks need an axis-aligned product structure")
    if any(alpha[j] for j in range(dim) if j not in prod.I) or \
            any(beta[j] for j in range(dim) if j not in prod.J):
        raise HypothesisViolated("alpha must live in I and beta in J")
    n = sum(alpha) + sum(beta)
    if n > 4:
        raise ConfigInvalid("order |alpha| + |beta| must be at most 4")
    k0 = report.k0
    times = np.geomspace(0.1, 1.0, 9) if times is None else np.asarray(times, float)
    deg = A.degrees()
    top = A.N_cut - 10 if init_degree is None else init_degree
    cols = np.nonzero(deg <= max(top, 0))[0]
    Mop, _ = monomial_operator(A.basis, alpha, beta)
    sat = np.linalg.norm(Mop[:, cols], 2)
    lhs = np.empty(len(times))
    leak = np.empty(len(times))
    if semigroup is None:
        semigroup = semigroup_table(A, times)
    for i, t in enumerate(times):
        Et = semigroup[i][:, cols]
        U, s, Vh = np.linalg.svd(Mop @ Et)
        lhs[i] = s[0]
        v = Vh[0].conj()
        leak[i] = np.linalg.norm(A.coupling @ (Et @ v))
    if enforce_leakage and leak.max() > leakage_threshold:
        raise LeakageExceeded(f"leakage {leak.max():.3e} above threshold")
    weight = sqrt(np.prod([factorial(a) for a in alpha]) * np.prod([factorial(b) for b in beta]))
    pred = n * (k0 + 0.5)
    if n == 0:
        C_hat = 1.0 if lhs.max() <= 1 + 1e-8 else float("inf")
    else:
        C_hat = float(np.max((lhs * times ** pred / weight) ** (1 / n)))
    resolved = (leak <= leakage_threshold) & (lhs <= saturation_ratio * sat)
    exponent = None
    if n and resolved.sum() >= 3:
        exponent = -float(np.polyfit(np.log(times[resolved]), np.log(lhs[resolved]), 1)[0])
    return SmoothingReport(alpha, beta, k0, times, lhs, leak, float(sat), resolved, C_hat,
                           exponent, pred)


# ---------------------------------------------------------------------------
# exact Fourier route for OU generators without potential

def _require_free(spec):
    if np.any(spec.R):
        raise HypothesisViolated("the Fourier route needs R = 0 (no confining potential)")


def ou_gramian(spec, t):
    """``W_t = int_0^t exp(sB) Q exp(sB^T) ds`` via the Van Loan block exponential."""
    d = spec.dim
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = spec.B
    block[:d, d:] = spec.Q
    block[d:, d:] = -spec.B.T
    E = expm(t * block)
    W = E[:d, d:] @ expm(t * spec.B.T)
    return (W + W.T) / 2


def fourier_dissipation(spec, lam, times):
    """``||(1 - P_lam) T(t)||`` with ``P_lam`` the Fourier cut ``|xi|^2 <= lam``.

    For ``R = 0`` the semigroup acts on the Fourier side by a transport
    along ``exp(t B^T)`` times ``exp(-1/2 xi.W_t xi)``, and the transport is
    unitary, so the norm is ``exp(-lam mu_min(W_t) / 2)``.
    """
    _require_free(spec)
    return np.array([exp(-0.5 * lam * eigh(ou_gramian(spec, t), eigvals_only=True)[0])
                     for t in times])


@dataclass(frozen=True)
class FourierDissipationReport:
    times: np.ndarray
    decay: np.ndarray
    lam: float
    c_hat: float
    exponent: Optional[float]
    predicted_exponent: int
    dominated: bool

    def to_document(self):
        return {"times": list(self.times), "decay": list(self.decay), "lambda": self.lam,
                "c_hat": self.c_hat, "exponent": self.exponent,
                "predicted_exponent": self.predicted_exponent, "bound_dominates": self.dominated}


def fourier_dissipation_experiment(spec, lam, k0, times=None, t0=1.0):
    """Exact decay curve and the same fits as :func:`dissipation_experiment`."""
    times = np.linspace(0.05, 0.5, 10) * t0 if times is None else np.asarray(times, float)
    decay = fourier_dissipation(spec, lam, times)
    p = 2 * k0 + 1
    c_hat, dominated, exponent = _fit_decay(times, decay, lam, p)
    return FourierDissipationReport(times, decay, float(lam), c_hat, exponent, p, dominated)


def _sphere_max(f, d, n_start=4000, seed=0):
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    if d == 1:
        return max(f(np.array([1.0])), f(np.array([-1.0])))
    if d == 2:
        th = np.linspace(0, np.pi, n_start, endpoint=False)
        cand = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        cand = rng.standard_normal((n_start, d))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    vals = np.array([f(w) for w in cand])
    best = float(vals.max())
    for i in np.argsort(vals)[-5:]:
        res = minimize(lambda v: -f(v / np.linalg.norm(v)), cand[i], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -float(res.fun))
    return best


def fourier_smoothing_norm(spec, beta, t):
    """Exact ``||d^beta T(t)||`` on ``L^2`` for an OU generator with ``R = 0``.

    Equals ``sup_xi |xi^beta| exp(-1/2 xi.W_t xi)``; along each ray the
    supremum is ``(n / (e w.W_t w))^{n/2} |w^beta|``.
    """
    _require_free(spec)
    beta = tuple(beta)
    n = sum(beta)
    if n == 0:
        return 1.0
    W = ou_gramian(spec, t)
    if eigh(W, eigvals_only=True)[0] <= 0:
        raise HypothesisViolated("Kalman rank condition fails; no smoothing")

    def ray(w):
        return float(np.prod(np.abs(w) ** np.array(beta))) * (n / (E_CONST * (w @ W @ w))) ** (n / 2)

    return _sphere_max(ray, spec.dim)


@dataclass(frozen=True)
class FourierSmoothingReport:
    beta: tuple
    times: np.ndarray
    norms: np.ndarray
    C_hat: float
    exponent: float
    predicted_exponent: float

    def to_document(self):
        return {"beta": list(self.beta), "times": list(self.times), "norms": list(self.norms),
                "C_hat": self.C_hat, "exponent": self.exponent,
                "predicted_exponent": self.predicted_exponent}


def fourier_smoothing_experiment(spec, beta, k0, times=None):
    """Smoothing constant and t-exponent from the exact multiplier norms."""
    times = np.geomspace(0.1, 1.0, 9) if times is None else np.asarray(times, float)
    beta = tuple(beta)
    n = sum(beta)
    norms = np.array([fourier_smoothing_norm(spec, beta, t) for t in times])
    weight = sqrt(np.prod([factorial(b) for b in beta]))
    pred = n * (k0 + 0.5)
    C_hat = float(np.max((norms * times ** pred / weight) ** (1 / n))) if n else 1.0
    exponent = -float(np.polyfit(np.log(times), np.log(norms), 1)[0]) if n else 0.0
    return FourierSmoothingReport(beta, times, norms, C_hat, exponent, pred)
