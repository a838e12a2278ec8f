"""Finite-dimensional null-control synthesis on Galerkin matrices."""
from dataclasses import dataclass, field
from fractions import Fraction
from math import exp, log, log10
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh, expm, schur

from .errors import (ConfigInvalid, HypothesisViolated, NonContraction,
                     NumericalReliabilityError, QuadratureUnreliable, SingularGramian)
from .hermite import GalerkinOperator, weyl_galerkin
from .symbols import adjoint_symbol

LOG10E = log10(exp(1))


def _matrix(A):
    return A.matrix if isinstance(A, GalerkinOperator) else np.atleast_2d(np.asarray(A, dtype=complex))


def is_normal(A, tol=1e-12):
    A = _matrix(A)
    scale = max(np.linalg.norm(A, 2) ** 2, 1e-300)
    return np.linalg.norm(A @ A.conj().T - A.conj().T @ A, 2) <= tol * scale


class Propagator:
    """``t -> exp(tA)``, diagonalized once when ``A`` is normal."""

    def __init__(self, A, tol=1e-8):
        self.A = _matrix(A)
        self.tol = tol
        self.normal = is_normal(self.A)
        if self.normal:
            T, Z = schur(self.A, output="complex")
            self._eig, self._Z = np.diag(T), Z

    def matrix(self, t):
        if t == 0:
            return np.eye(len(self.A), dtype=complex)
        if self.normal:
            return (self._Z * np.exp(t * self._eig)) @ self._Z.conj().T
        return expm(t * self.A)

    def __call__(self, t, v):
        v = np.asarray(v, dtype=complex)
        out = self.matrix(t) @ v
        if np.linalg.norm(out) > (1 + self.tol) * np.linalg.norm(v) + 1e-300:
            raise NonContraction(f"norm grew from {np.linalg.norm(v):.6e} to {np.linalg.norm(out):.6e}")
        return out


def propagate(A, t, v):
    """``exp(tA) v``; raises :class:`NonContraction` if the norm grows."""
    if t < 0:
        raise ConfigInvalid("propagation time must be nonnegative")
    return Propagator(A)(t, v)


# ---------------------------------------------------------------------------
# problems and Gramians

@dataclass(frozen=True)
class ControlProblem:
    """``w' = A w + M u`` with sensor Gram matrix ``M`` on the Galerkin basis."""

    A: object
    M: np.ndarray
    T: float
    w0: np.ndarray

    def __post_init__(self):
        A = _matrix(self.A)
        M = np.atleast_2d(np.asarray(self.M))
        if M.shape != A.shape or self.T <= 0:
            raise ConfigInvalid("sensor Gram matrix must match A and T must be positive")
        if np.linalg.norm(M - M.conj().T) > 1e-10 * max(1.0, np.linalg.norm(M)):
            raise ConfigInvalid("sensor Gram matrix is not Hermitian")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "w0", np.asarray(self.w0, dtype=complex).reshape(-1))

    @property
    def matrix(self):
        return _matrix(self.A)

    @property
    def size(self):
        return len(self.M)

    def adjoint(self):
        """Same sensor and horizon, generator replaced by its adjoint."""
        if isinstance(self.A, GalerkinOperator):
            A = self.A
            Astar = weyl_galerkin(adjoint_symbol(A.symbol), A.N_cut)
            if np.max(np.abs(Astar.matrix - A.matrix.conj().T), initial=0) > 1e-10:
                raise NumericalReliabilityError("adjoint symbol does not assemble to the adjoint matrix")
            return ControlProblem(Astar, self.M, self.T, self.w0)
        return ControlProblem(self.matrix.conj().T, self.M, self.T, self.w0)


def _composite_rule(T, panels, order=8):
    x, w = leggauss(order)
    edges = np.linspace(0, T, panels + 1)
    ts = np.concatenate([(b - a) / 2 * x + (a + b) / 2 for a, b in zip(edges[:-1], edges[1:])])
    ws = np.concatenate([(b - a) / 2 * w for a, b in zip(edges[:-1], edges[1:])])
    return ts, ws


def _gramian_on_rule(prop, M, ts, ws):
    G = np.zeros(M.shape, dtype=complex)
    for t, w in zip(ts, ws):
        E = prop.matrix(t)
        G += w * (E.conj().T @ M @ E)
    return (G + G.conj().T) / 2


@dataclass(frozen=True)
class Gramian:
    matrix: np.ndarray
    panels: int
    change: float


def gramian(problem, tol=1e-8, max_panels=512, order=8):
    """``G_T = int_0^T exp(tA*) M exp(tA) dt``.

    Composite Gauss-Legendre; panels double until the relative change of
    ``G_T`` is below ``tol``.  When ``A`` comes with a symbol, its adjoint
    is assembled from the adjoint symbol and compared with the conjugate
    transpose.
    """
    if isinstance(problem.A, GalerkinOperator):
        problem.adjoint()
    prop = Propagator(problem.matrix)
    M = problem.M
    panels = max(1, int(np.ceil(problem.T)))
    G = _gramian_on_rule(prop, M, *_composite_rule(problem.T, panels, order))
    while True:
        panels *= 2
        G2 = _gramian_on_rule(prop, M, *_composite_rule(problem.T, panels, order))
        scale = max(np.linalg.norm(G2, 2), 1e-300)
        change = np.linalg.norm(G2 - G, 2) / scale
        if change <= tol or np.linalg.norm(G2, 2) == 0:
            return Gramian(G2, panels, float(change))
        if panels >= max_panels:
            raise QuadratureUnreliable(f"Gramian still changing by {change:.2e}")
        G = G2


def control_gramian(problem, **kw):
    """``int_0^T exp(sA) M exp(sA*) ds``: the observability Gramian of the adjoint problem."""
    return gramian(problem.adjoint(), **kw)


# ---------------------------------------------------------------------------
# HUM

@dataclass(frozen=True)
class ControlResult:
    times: np.ndarray
    control: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    residual: float
    cost: float
    cost_quadrature: float
    eps_reg: float
    gramian_condition: float
    final_state: np.ndarray = field(repr=False)

    def feedback(self, problem, t):
        """Control coefficients ``M exp((T - t) A*) p`` at any time."""
        prop = Propagator(problem.matrix.conj().T)
        return problem.M @ (prop.matrix(problem.T - t) @ self.p)

    def to_document(self):
        return {"residual": self.residual, "cost": self.cost,
                "cost_quadrature": self.cost_quadrature, "eps_reg": self.eps_reg,
                "gramian_condition": self.gramian_condition}


def reconstruct(problem, p, panels, order=8):
    """Mild solution ``w(T)`` and ``int ||1_omega u||^2`` for the feedback ``p``."""
    A = problem.matrix
    prop = Propagator(A)
    adj = Propagator(A.conj().T)
    ts, ws = _composite_rule(problem.T, panels, order)
    wT = prop.matrix(problem.T) @ problem.w0
    cost2 = 0.0
    for t, w in zip(ts, ws):
        v = adj.matrix(problem.T - t) @ p
        u = problem.M @ v
        wT = wT + w * (prop.matrix(problem.T - t) @ u)
        cost2 += w * float(np.real(np.vdot(v, u)))
    return wT, cost2


def hum_control(problem, eps_reg=None, residual_target=None, gram=None):
    """Minimal-norm control for the regularized Gramian equation.

    Solves ``(G + eps I) p = -exp(TA) w0`` with the control Gramian ``G``
    and applies ``u(t) = M exp((T - t) A*) p``.  The state ``w(T)`` is
    rebuilt by quadrature of the mild solution; ``cost**2 = <p, G p>``.
    """
    n = problem.size
    w0 = problem.w0
    gram = gram or control_gramian(problem)
    G = gram.matrix
    if eps_reg is None:
        eps_reg = 1e-10 * float(np.real(np.trace(G))) / n
    ev = eigh(G, eigvals_only=True)
    cond = float(ev[-1] / max(ev[0], 1e-300)) if ev[-1] > 0 else float("inf")
    if not np.any(w0):
        ts, _ = _composite_rule(problem.T, gram.panels)
        return ControlResult(ts, np.zeros((len(ts), n), complex), np.zeros(n, complex),
                             0.0, 0.0, 0.0, eps_reg, cond, np.zeros(n, complex))
    rhs = -Propagator(problem.matrix).matrix(problem.T) @ w0
    p = np.linalg.solve(G + eps_reg * np.eye(n), rhs)
    wT, cost2q = reconstruct(problem, p, gram.panels)
    residual = float(np.linalg.norm(wT) / np.linalg.norm(w0))
    cost = float(np.sqrt(max(np.real(np.vdot(p, G @ p)), 0.0)))
    if residual_target is not None and residual > residual_target:
        raise SingularGramian(f"residual {residual:.2e} above target at eps {eps_reg:.1e}; "
                              "try a longer horizon or a denser sensor")
    ts, _ = _composite_rule(problem.T, gram.panels)
    adj = Propagator(problem.matrix.conj().T)
    control = np.array([problem.M @ (adj.matrix(problem.T - t) @ p) for t in ts])
    return ControlResult(ts, control, p, residual, cost, float(np.sqrt(max(cost2q, 0))),
                         float(eps_reg), cond, wT)


def trajectory(problem, result, times):
    """Rows ``(t, ||w(t)||, ||u(t)||)`` with ``w`` rebuilt by quadrature on ``[0, t]``."""
    A = problem.matrix
    prop = Propagator(A)
    rows = []
    for t in times:
        w = prop.matrix(t) @ problem.w0
        if t > 0:
            ts, ws = _composite_rule(t, max(1, result.times.size // 8))
            for s, wt in zip(ts, ws):
                w = w + wt * (prop.matrix(t - s) @ result.feedback(problem, s))
        rows.append((float(t), float(np.linalg.norm(w)),
                     float(np.linalg.norm(result.feedback(problem, t)))))
    return rows


# ---------------------------------------------------------------------------
# observability

@dataclass(frozen=True)
class ObservabilityEstimate:
    empirical: float
    exact: float
    samples: int

    def to_document(self):
        return {"empirical": self.empirical, "exact": self.exact, "samples": self.samples}


def observability_check(problem, samples=32, seed=0, eps_reg=0.0, gram=None):
    """Empirical and exact ``C_obs`` for ``||T(T) g||^2 <= C^2 <g, G_T g>``.

    The exact value is the largest generalized eigenvalue of
    ``(E* E, G_T + eps I)`` with ``E = exp(TA)``.
    """
    gram = gram or gramian(problem)
    G = gram.matrix + eps_reg * np.eye(problem.size)
    ev = eigh(G, eigvals_only=True)
    if ev[0] <= 1e-15 * max(ev[-1], 1e-300):
        raise SingularGramian("observability Gramian is numerically singular")
    E = Propagator(problem.matrix).matrix(problem.T)
    top = eigh(E.conj().T @ E, G, eigvals_only=True)[-1]
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        g = rng.standard_normal(problem.size) + 1j * rng.standard_normal(problem.size)
        num = np.linalg.norm(E @ g)
        den = np.sqrt(np.real(np.vdot(g, G @ g)))
        best = max(best, num / den)
    return ObservabilityEstimate(float(best), float(np.sqrt(top)), samples)


# ---------------------------------------------------------------------------
# Lebeau-Robbiano schedule

def _frac(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(str(v))
    return Fraction(v)


@dataclass(frozen=True)
class Stage:
    index: int
    lam: float
    passive: tuple
    active: tuple
    log_A: float
    log_B: float


@dataclass(frozen=True)
class LRSchedule:
    stages: tuple
    idle: tuple
    lam0: float
    T_eff: float
    log10_C_obs2: float
    exponent: Fraction
    log10_remainder: float
    inputs: dict

    @property
    def C_obs2(self):
        return 10.0 ** self.log10_C_obs2 if self.log10_C_obs2 < 300 else float("inf")

    def to_document(self):
        return {"inputs": self.inputs, "lambda0": self.lam0, "T_eff": self.T_eff,
                "constructive_C": True, "log10_C_obs2": self.log10_C_obs2,
                "exponent": str(self.exponent), "log10_remainder": self.log10_remainder,
                "idle": list(self.idle),
                "stages": [{"j": s.index, "lambda": s.lam, "passive": list(s.passive),
                            "active": list(s.active)} for s in self.stages]}


def lr_schedule(d0, d1, g1, d2, d3, g2, g3, t0, T, n_stages=40):
    """Dyadic stage construction with a constructive observability constant.

    Stage ``j`` occupies ``(o + T_eff 2^{-j-1}, o + T_eff 2^{-j}]`` with
    ``T_eff = min(T, 2 t0)`` and ``o = T - T_eff``; its first half is
    passive and its second half active, with threshold
    ``lam_j = lam0 2^{j theta}``, ``theta = g3 / (g2 - g1)``.  With
    ``A_j = 4 d0 e^{d1 lam_j^g1} / l_j`` and
    ``B_j = (2 d0 e^{d1 lam_j^g1} + 1) d2 e^{-d3 lam_j^g2 (l_j/2)^g3}``
    each stage gives ``X_j <= A_j obs_j + B_j X_{j+1}``; ``lam0`` is chosen
    so that ``A_{j+1} B_j <= A_j / 2``, whence ``C_obs^2 = A_0``.
    """
    if not all(v > 0 for v in (d0, d1, g1, d3, g2, g3, t0, T)) or d2 < 1:
        raise HypothesisViolated("constants must be positive and d2 >= 1")
    if g2 <= g1:
        raise HypothesisViolated("need gamma2 > gamma1")
    exponent = _frac(g1) * _frac(g3) / (_frac(g2) - _frac(g1))
    d0, d1, g1, d2, d3, g2, g3 = map(float, (d0, d1, g1, d2, d3, g2, g3))
    theta = g3 / (g2 - g1)
    T_eff = min(float(T), 2.0 * t0)
    o = float(T) - T_eff
    c_star = log(4 * (2 * d0 + 1) * d2)
    lam_a = (2 * d1 * 2 ** (theta * g1 + 2 * g3) / (d3 * T_eff ** g3)) ** (1 / (g2 - g1))
    lam_b = (c_star / d1) ** (1 / g1) / 2 ** theta
    lam0 = max(1.0, lam_a, lam_b)
    stages = []
    log_rem = 0.0
    for j in range(n_stages):
        lam = lam0 * 2 ** (j * theta)
        a, b = o + T_eff * 2.0 ** (-j - 1), o + T_eff * 2.0 ** (-j)
        length = b - a
        Ej = d1 * lam ** g1
        Dj = d3 * lam ** g2 * (length / 2) ** g3
        log_A = log(4 * d0 / length) + Ej
        log_B = log(2 * d0 * exp(min(Ej, 700)) + 1) + log(d2) - Dj if Ej < 700 else \
            log(2 * d0) + Ej + log(d2) - Dj
        log_rem += log_B
        stages.append(Stage(j, lam, (a, (a + b) / 2), ((a + b) / 2, b), log_A, log_B))
    for s, nxt in zip(stages[:-1], stages[1:]):
        if nxt.log_A + s.log_B > s.log_A - log(2) + 1e-9:
            raise NumericalReliabilityError("stage recursion failed; constant choice is inconsistent")
    inputs = {"d0": d0, "d1": d1, "gamma1": g1, "d2": d2, "d3": d3, "gamma2": g2,
              "gamma3": g3, "t0": t0, "T": float(T)}
    return LRSchedule(tuple(stages), (0.0, o), lam0, T_eff, stages[0].log_A * LOG10E,
                      exponent, log_rem * LOG10E, inputs)


def schedule_exponent_measured(d0, d1, g1, d2, d3, g2, g3, t0, T):
    """``log2`` ratio of the spectral exponent ``d1 lam0^g1`` between ``T/2`` and ``T``.

    Equals the exact exponent while the ``lam_a`` branch sets ``lam0``.
    """
    s1 = lr_schedule(d0, d1, g1, d2, d3, g2, g3, t0, T, n_stages=2)
    s2 = lr_schedule(d0, d1, g1, d2, d3, g2, g3, t0, T / 2, n_stages=2)
    return float(np.log2((s2.lam0 / s1.lam0) ** float(g1)))


def sharp_cost_bound(rho, gamma, T, d, c1=1.0, c2=1.0):
    """log10 of ``c1/T exp(c2 / T^3 (1+rho)^8 gamma^{-4})``; ``c1, c2`` are inputs."""
    if rho < 0 or gamma <= 0 or T <= 0 or c1 <= 0 or c2 <= 0 or d < 1:
        raise HypothesisViolated("parameters must be positive")
    return log10(c1 / T) + c2 / T ** 3 * (1 + rho) ** 8 * gamma ** -4 * LOG10E
