"""Sensor sets, cell densities, coverings and convex-distortion factors.

Lattice cells are the half-open cubes ``Lambda_L(m) = m + [-L/2, L/2)^d``
for ``m`` in ``(L Z)^d``.  Index sets are zero-based.
"""
from dataclasses import dataclass, field
from itertools import product
from math import gamma as gamma_fn, pi, sqrt
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import BudgetTooSmall, ConfigInvalid, RadiusDegenerate, UnsupportedShape
from .hermite import hermite_functions

Z99 = 2.5758293035489004


def unit_ball_volume(d):
    return pi ** (d / 2) / gamma_fn(d / 2 + 1)


# ---------------------------------------------------------------------------
# sensor sets

def decay_rate(gamma, a, m, I):
    """``gamma^{1+|m_I|^a}`` with ``|0|^a = 0`` also for ``a = 0``."""
    r = float(np.linalg.norm(np.asarray(m, float)[list(I)]))
    return gamma * (gamma ** (r ** a) if r > 0 else 1.0)

def intro_radius(m):
    """Radius ``2^{-1-sqrt|m|}`` of the ball-union example."""
    return 2.0 ** (-1 - sqrt(float(np.linalg.norm(m))))


@dataclass(frozen=True)
class SensorSet:
    """Measurable set descriptor.

    kind
        ``lattice_cubes``: cube of side ``L gamma^{(1+|m_I|^a)/d}`` centred
        at each lattice point (density exactly ``gamma^{1+|m_I|^a}``);
        ``lattice_balls``: ball of radius ``radius_rule(m)`` at each lattice
        point; ``thick_pattern``: corner-anchored sub-cube of relative
        volume ``gamma`` in every cell; ``complement_box``: everything
        outside ``[-half_width, half_width]^d``; ``whole``; ``empty``;
        ``indicator``: membership callback (Monte Carlo only).
    """

    kind: str
    dim: int
    gamma: Optional[float] = None
    a: float = 0.0
    L: float = 1.0
    I: tuple = ()
    half_width: float = 1.0
    radius_rule: Optional[Callable] = field(default=None, compare=False)
    indicator: Optional[Callable] = field(default=None, compare=False)

    KINDS = ("lattice_cubes", "lattice_balls", "thick_pattern", "complement_box",
             "whole", "empty", "indicator")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigInvalid(f"unknown sensor kind {self.kind!r}")
        if self.kind in ("lattice_cubes", "thick_pattern"):
            if self.gamma is None or not 0 < self.gamma < 1:
                raise ConfigInvalid("gamma must lie in (0, 1)")
        if self.kind == "lattice_cubes" and not 0 <= self.a < 1:
            raise ConfigInvalid("a must lie in [0, 1)")
        if self.kind == "indicator" and self.indicator is None:
            raise ConfigInvalid("indicator sets need a membership callback")
        if self.L <= 0:
            raise ConfigInvalid("lattice spacing must be positive")
        object.__setattr__(self, "I", tuple(sorted(self.I)))

    @property
    def rule_based(self):
        return self.kind != "indicator"

    def decay_rate(self, m):
        """``gamma^{1+|m_I|^a}`` at lattice point ``m``."""
        return decay_rate(self.gamma, self.a, m, self.I)

    def radius(self, m):
        rule = self.radius_rule or intro_radius
        return rule(np.asarray(m, float))

    def lattice_points(self, lo, hi):
        """Lattice points whose cells meet the box ``[lo, hi]``."""
        lo = np.broadcast_to(np.asarray(lo, float), (self.dim,))
        hi = np.broadcast_to(np.asarray(hi, float), (self.dim,))
        ranges = [range(int(np.floor(l / self.L - 0.5)), int(np.ceil(h / self.L + 0.5)) + 1)
                  for l, h in zip(lo, hi)]
        return [self.L * np.array(k, float) for k in product(*ranges)]

    def pieces(self, lo, hi):
        """Disjoint elementary pieces (boxes and balls) meeting ``[lo, hi]``.

        Returns ``None`` when the set has no such description.
        """
        lo = np.broadcast_to(np.asarray(lo, float), (self.dim,))
        hi = np.broadcast_to(np.asarray(hi, float), (self.dim,))
        out = []
        if self.kind == "whole":
            return [("box", lo.copy(), hi.copy())]
        if self.kind == "empty":
            return []
        if self.kind == "complement_box":
            h = self.half_width
            return [("box", a, b) for a, b in _box_minus_box(lo, hi, -h, h)]
        if self.kind == "indicator":
            return None
        for m in self.lattice_points(lo, hi):
            if self.kind == "lattice_cubes":
                s = self.L * self.decay_rate(m) ** (1 / self.dim) / 2
                piece = ("box", m - s, m + s)
            elif self.kind == "thick_pattern":
                a = m - self.L / 2
                piece = ("box", a, a + self.L * self.gamma ** (1 / self.dim))
            else:
                piece = ("ball", m, self.radius(m))
            if _piece_meets(piece, lo, hi):
                out.append(piece)
        return out

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, float))
        if self.kind == "indicator":
            return np.asarray(self.indicator(points), bool)
        if self.kind == "whole":
            return np.ones(len(points), bool)
        if self.kind == "empty":
            return np.zeros(len(points), bool)
        if self.kind == "complement_box":
            return np.any(np.abs(points) > self.half_width, axis=1)
        m = self.L * np.round(points / self.L)
        out = np.zeros(len(points), bool)
        for i, (p, c) in enumerate(zip(points, m)):
            for piece in self.pieces(c - self.L / 2, c + self.L / 2):
                out[i] |= _in_piece(piece, p)
        return out

    def to_document(self):
        doc = {"kind": self.kind, "dim": self.dim, "L": self.L,
               "I": [i + 1 for i in self.I]}
        if self.gamma is not None:
            doc["gamma"] = self.gamma
        if self.kind == "lattice_cubes":
            doc["a"] = self.a
        if self.kind == "complement_box":
            doc["half_width"] = self.half_width
        return {"sensor": doc}


def sensor_from_document(doc):
    s = doc.get("sensor", doc)
    kind = s.get("kind")
    dim = int(s.get("dim", 1))
    I = tuple(int(i) - 1 for i in s.get("I", range(1, dim + 1)))
    return SensorSet(kind, dim, gamma=s.get("gamma"), a=float(s.get("a", 0.0)),
                     L=float(s.get("L", 1.0)), I=I,
                     half_width=float(s.get("half_width", 1.0)))


def example_set(gamma, a, dim=1, I=None, L=1.0):
    """Cube union with densities exactly ``gamma^{1+|k_I|^a}``."""
    return SensorSet("lattice_cubes", dim, gamma=gamma, a=a, L=L,
                     I=tuple(range(dim)) if I is None else I)


def intro_set(dim=1):
    return SensorSet("lattice_balls", dim, I=tuple(range(dim)))


def _box_minus_box(lo, hi, ilo, ihi):
    """Disjoint boxes covering ``[lo, hi]`` minus ``[ilo, ihi]^d``."""
    out = []
    lo, hi = lo.copy(), hi.copy()
    for j in range(len(lo)):
        if lo[j] < ilo:
            a, b = lo.copy(), hi.copy()
            b[j] = min(hi[j], ilo)
            out.append((a, b))
        if hi[j] > ihi:
            a, b = lo.copy(), hi.copy()
            a[j] = max(lo[j], ihi)
            out.append((a, b))
        lo[j], hi[j] = max(lo[j], ilo), min(hi[j], ihi)
        if lo[j] >= hi[j]:
            break
    return [(a, b) for a, b in out if np.all(b > a)]


def _piece_meets(piece, lo, hi):
    kind, c, s = piece
    if kind == "box":
        return bool(np.all(np.minimum(s, hi) > np.maximum(c, lo)))
    gap = np.maximum(lo - c, 0) + np.maximum(c - hi, 0)
    return bool(np.linalg.norm(gap) < s)


def _in_piece(piece, p):
    kind, c, s = piece
    if kind == "box":
        return bool(np.all((p >= c) & (p < s)))
    return bool(np.linalg.norm(p - c) < s)


# ---------------------------------------------------------------------------
# exact areas

def _disk_rect_area(r, x0, x1, y0, y1):
    """Area of the disk of radius ``r`` at the origin within a rectangle."""
    a, b = max(x0, -r), min(x1, r)
    if a >= b or y0 >= y1:
        return 0.0

    def s(x):
        return sqrt(max(r * r - x * x, 0.0))

    def G(x):
        x = min(max(x, -r), r)
        return 0.5 * (x * s(x) + r * r * np.arcsin(x / r))

    cuts = {a, b}
    for y in (y0, y1):
        if abs(y) < r:
            w = sqrt(r * r - y * y)
            cuts.update(v for v in (-w, w) if a < v < b)
    cuts = sorted(cuts)
    area = 0.0
    for u, v in zip(cuts[:-1], cuts[1:]):
        # two probe points so that a tangency cannot hide the ordering
        probes = (u + 0.381966 * (v - u), u + 0.618034 * (v - u))
        top_is_curve = any(s(p) < y1 for p in probes)
        bot_is_curve = any(-s(p) > y0 for p in probes)
        mid = probes[0]
        top = s(mid) if top_is_curve else y1
        bot = -s(mid) if bot_is_curve else y0
        if top <= bot:
            continue
        upper = (G(v) - G(u)) if top_is_curve else y1 * (v - u)
        lower = -(G(v) - G(u)) if bot_is_curve else y0 * (v - u)
        area += upper - lower
    return area


def _piece_cell_measure(piece, lo, hi):
    kind, c, s = piece
    d = len(lo)
    if kind == "box":
        return float(np.prod(np.clip(np.minimum(s, hi) - np.maximum(c, lo), 0, None)))
    if d == 1:
        return max(0.0, min(c[0] + s, hi[0]) - max(c[0] - s, lo[0]))
    if d == 2:
        return _disk_rect_area(s, lo[0] - c[0], hi[0] - c[0], lo[1] - c[1], hi[1] - c[1])
    return None


# ---------------------------------------------------------------------------
# density estimation

@dataclass(frozen=True)
class DensityEstimate:
    value: float
    ci_low: float
    ci_high: float
    exact: bool


def cell_density(omega, cell, budget=100_000, seed=0, target=None):
    """Relative measure ``|omega & cell| / |cell|`` of an axis box ``cell = (lo, hi)``.

    Exact for box and ball pieces in dimension <= 2; otherwise stratified
    Monte Carlo with ``budget`` points and a 99% confidence interval.
    ``BudgetTooSmall`` is raised when ``target`` is given and the interval
    is wider than ten percent of it.
    """
    lo, hi = (np.broadcast_to(np.asarray(v, float), (omega.dim,)) for v in cell)
    vol = float(np.prod(hi - lo))
    pieces = omega.pieces(lo, hi)
    if pieces is not None:
        parts = [_piece_cell_measure(p, lo, hi) for p in pieces]
        if all(v is not None for v in parts):
            val = min(1.0, sum(parts) / vol)
            return DensityEstimate(val, val, val, True)
    rng = np.random.default_rng(seed)
    d = omega.dim
    k = max(1, int((budget / 16) ** (1 / d)))
    per = max(2, budget // k ** d)
    width = (hi - lo) / k
    est, var = 0.0, 0.0
    for idx in product(range(k), repeat=d):
        a = lo + np.array(idx) * width
        pts = a + rng.random((per, d)) * width
        hits = int(np.sum(omega.contains(pts)))
        est += hits / per / k ** d
        # smoothed proportion keeps all-in / all-out strata from reporting zero variance
        ps = (hits + 1) / (per + 2)
        var += ps * (1 - ps) / per / k ** (2 * d)
    half = Z99 * sqrt(var)
    if target is not None and 2 * half > 0.1 * target:
        raise BudgetTooSmall(f"CI width {2 * half:.3e} exceeds 10% of {target:.3e}")
    return DensityEstimate(est, max(0.0, est - half), min(1.0, est + half), False)


@dataclass(frozen=True)
class DecayReport:
    passed: bool
    rows: tuple
    worst_cell: tuple
    worst_ratio: float
    first_failure: Optional[tuple]
    beyond_range: str

    def csv_rows(self):
        head = ("cell", "estimate", "ci_low", "ci_high", "bound", "pass")
        return [head] + [tuple(r) for r in self.rows]


def verify_decay(omega, L, gamma, a, I, cell_range, budget=100_000, seed=0):
    """Check ``|omega & Lambda_L(m)| / L^d >= gamma^{1+|m_I|^a}`` cell by cell.

    ``cell_range`` is an integer ``R`` (all ``m`` with ``|m_j| <= R L``)
    or an explicit list of lattice points.
    """
    d = omega.dim
    if np.isscalar(cell_range):
        R = int(cell_range)
        cells = [L * np.array(k, float) for k in product(range(-R, R + 1), repeat=d)]
    else:
        cells = [np.asarray(c, float) for c in cell_range]
    rows = []
    worst, worst_ratio, first = None, np.inf, None
    for i, m in enumerate(cells):
        bound = decay_rate(gamma, a, m, I)
        est = cell_density(omega, (m - L / 2, m + L / 2), budget=budget,
                           seed=[seed, i])
        ok = est.ci_low >= bound * (1 - 1e-12)
        key = tuple(float(v) for v in m)
        rows.append((key, est.value, est.ci_low, est.ci_high, bound, bool(ok)))
        ratio = est.ci_low / bound
        if ratio < worst_ratio:
            worst, worst_ratio = key, ratio
        if not ok and first is None:
            first = key
    beyond = "certified-by-rule" if omega.rule_based else "unchecked"
    return DecayReport(first is None, tuple(rows), worst, worst_ratio, first, beyond)


# ---------------------------------------------------------------------------
# cells and coverings

@dataclass(frozen=True)
class Cell:
    """Product cell: intervals ``[lo_j, hi_j)`` or a ball in some coordinates.

    ``kind`` is ``cube`` (axis box), ``ball`` (Euclidean ball) or
    ``ballbox`` (ball in the oscillator coordinates ``I`` times a box in
    the rest).  ``lo``/``hi`` always hold the bounding box.
    """

    kind: str
    lo: np.ndarray
    hi: np.ndarray
    center: np.ndarray
    radius: float = 0.0
    I: tuple = ()

    def interval(self, j):
        return float(self.lo[j]), float(self.hi[j])

    def is_product(self):
        if self.kind == "cube":
            return True
        nball = len(self.I) if self.kind == "ballbox" else len(self.lo)
        return nball <= 1

    def contains(self, points):
        points = np.atleast_2d(points)
        inside = np.all((points >= self.lo) & (points < self.hi), axis=1)
        if self.kind == "cube":
            return inside
        idx = list(self.I) if self.kind == "ballbox" else list(range(len(self.lo)))
        dist = np.linalg.norm(points[:, idx] - self.center[idx], axis=1)
        return inside & (dist <= self.radius)


@dataclass(frozen=True)
class Covering:
    cells: tuple
    kappa: float
    provenance: str
    probe_coverage: float = 1.0


def cube_cell(center, L):
    c = np.asarray(center, float)
    return Cell("cube", c - L / 2, c + L / 2, c)


def lattice_covering(dim, L, lo, hi):
    """Half-open lattice cubes meeting ``[lo, hi)^dim``; multiplicity one."""
    ranges = [range(int(np.floor(lo / L + 0.5)), int(np.ceil(hi / L - 0.5)) + 1)] * dim
    cells = tuple(cube_cell(L * np.array(k, float), L) for k in product(*ranges))
    return Covering(cells, 1.0, "lattice")


def multiplicity(covering, points):
    points = np.atleast_2d(points)
    count = np.zeros(len(points), int)
    for c in covering.cells:
        count += c.contains(points)
    return count


def besicovitch_covering(rho, lo, hi, spacing=0.01):
    """Greedy ball covering of the box ``[lo, hi]``.

    Repeatedly takes the uncovered probe point of largest radius (first in
    grid order on ties) and adds the closed ball ``B(y, rho(y))``.  The
    multiplicity is measured on the probe grid and stored as ``kappa``.
    """
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    if np.any(hi < lo):
        return Covering((), 0.0, "besicovitch")
    axes = [np.linspace(a, b, max(2, int(round((b - a) / spacing)) + 1)) for a, b in zip(lo, hi)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    radii = np.array([float(rho(p)) for p in grid])
    if np.any(radii < spacing):
        raise RadiusDegenerate("radius below probe-grid resolution")
    covered = np.zeros(len(grid), bool)
    count = np.zeros(len(grid), int)
    cells = []
    while not covered.all():
        cand = np.nonzero(~covered)[0]
        y = cand[np.argmax(radii[cand])]
        c, r = grid[y], radii[y]
        inside = np.linalg.norm(grid - c, axis=1) <= r
        covered |= inside
        count += inside
        cells.append(Cell("ball", c - r, c + r + 1e-12, c.copy(), r))
    return Covering(tuple(cells), float(count.max()), "besicovitch", float(covered.mean()))


def ballbox_covering(ball_cover, I, dim, L, free_lo, free_hi):
    """Cells ``B(y, rho(y)) x Lambda_L(m)`` over oscillator and free coordinates."""
    free = [j for j in range(dim) if j not in I]
    grid = lattice_covering(len(free), L, free_lo, free_hi).cells if free else [None]
    cells = []
    for ball in ball_cover.cells:
        for box in grid:
            lo = np.empty(dim)
            hi = np.empty(dim)
            center = np.empty(dim)
            lo[list(I)], hi[list(I)], center[list(I)] = ball.lo, ball.hi, ball.center
            if box is not None:
                lo[free], hi[free], center[free] = box.lo, box.hi, box.center
            cells.append(Cell("ballbox", lo, hi, center, ball.radius, tuple(I)))
    return Covering(tuple(cells), ball_cover.kappa, "besicovitch", ball_cover.probe_coverage)


def kc_constant(kappa, d1):
    """``C = 32 d1 (1 + sqrt(log kappa))``."""
    return 32 * d1 * (1 + sqrt(np.log(kappa)))


def kc_select(covering, lam, kappa, d1, I=None):
    """Cells meeting ``B(0, C lam^{1/2}) x R^{d2}`` in oscillator coordinates."""
    R = kc_constant(kappa, d1) * sqrt(lam)
    out = []
    for i, c in enumerate(covering.cells):
        idx = list(range(d1)) if I is None else list(I)
        if c.kind == "cube":
            gap = np.maximum(np.maximum(c.lo[idx], -c.hi[idx]), 0)
            dist = float(np.linalg.norm(gap))
        else:
            dist = max(0.0, float(np.linalg.norm(c.center[idx])) - c.radius)
        if dist < R:
            out.append(i)
    return out


# ---------------------------------------------------------------------------
# local norms and the good/bad split

def _hermite_interval_gram(n, a, b, nodes=64):
    x, w = leggauss(nodes)
    xs = (b - a) / 2 * x + (a + b) / 2
    H = hermite_functions(n - 1, xs)
    return (H * (w * (b - a) / 2)) @ H.T


def _fourier_interval_gram(etas, a, b):
    diff = etas[:, None] - etas[None, :]
    out = np.empty(diff.shape, dtype=complex)
    zero = np.abs(diff) < 1e-14
    out[zero] = b - a
    dz = diff[~zero]
    out[~zero] = (np.exp(1j * dz * b) - np.exp(1j * dz * a)) / (1j * dz)
    return out


def local_norm2(f, cell):
    """``||f||^2`` on a product cell, via separable one-dimensional Gram matrices."""
    if not cell.is_product():
        raise UnsupportedShape("local norms need product cells")
    C = f.coeffs
    G = C
    for axis, j in enumerate(f.I):
        a, b = cell.interval(j)
        M = _hermite_interval_gram(C.shape[axis], a, b)
        G = np.moveaxis(np.tensordot(M, G, axes=([1], [axis])), 0, axis)
    if f.free:
        etas = f.etas
        F = np.ones((len(etas), len(etas)), dtype=complex)
        for col, j in enumerate(f.free):
            a, b = cell.interval(j)
            e = etas[:, col]
            F = F * _fourier_interval_gram(e, a, b)
        G = np.tensordot(G, F, axes=([G.ndim - 1], [0]))
    return float(np.real(np.vdot(C, G)))


@dataclass(frozen=True)
class GoodBadReport:
    good: tuple
    kc: tuple
    cell_mass: np.ndarray = field(repr=False)
    total_mass: float = 0.0
    bad_mass: float = 0.0
    kc_good_mass: float = 0.0
    margin_at_mmax: float = 0.0

    @property
    def bad_fraction(self):
        return self.bad_mass / self.total_mass if self.total_mass else 0.0

    def bad_mass_ok(self, slack=1e-6):
        return self.bad_mass <= 0.5 * self.total_mass * (1 + slack)

    def mass_lemma_ok(self, slack=1e-6):
        return self.total_mass <= 4 * self.kc_good_mass * (1 + slack)


def good_bad_split(covering, f, lam, kappa, m_max=4, total_mass=None):
    """Classify cells by the localized Bernstein inequality for ``m <= m_max``.

    A cell is good when ``sum_{|alpha|=m} ||d^alpha f||^2_Q / alpha! <=
    2^{m+1} kappa C_B(m, lam) / m! ||f||^2_Q`` for every ``m`` in
    ``1..m_max``.  The reported margin is the smallest ratio of right to
    left side at ``m_max`` among good cells.
    """
    from math import factorial

    from .hermite import _compositions, bernstein_constant

    derivs = {}
    for m in range(1, m_max + 1):
        for alpha in _compositions(f.dim, m):
            w = 1.0 / np.prod([factorial(v) for v in alpha])
            derivs.setdefault(m, []).append((w, f.derivative(alpha)))
    masses = np.array([local_norm2(f, c) for c in covering.cells])
    good, margin = [], np.inf
    for i, cell in enumerate(covering.cells):
        ok = True
        ratio = np.inf
        for m in range(1, m_max + 1):
            lhs = sum(w * local_norm2(g, cell) for w, g in derivs[m])
            rhs = 2 ** (m + 1) * kappa * bernstein_constant(m, lam) / factorial(m) * masses[i]
            if lhs > rhs:
                ok = False
                break
            if m == m_max:
                ratio = rhs / lhs if lhs > 0 else np.inf
        if ok:
            good.append(i)
            margin = min(margin, ratio)
    d1 = len(f.I)
    kc = kc_select(covering, lam, kappa, max(d1, 1), f.I) if d1 else list(range(len(covering.cells)))
    total = float(masses.sum()) if total_mass is None else float(total_mass)
    gset = set(good)
    bad_mass = float(sum(masses[i] for i in range(len(masses)) if i not in gset))
    kcg = float(sum(masses[i] for i in kc if i in gset))
    return GoodBadReport(tuple(good), tuple(kc), masses, total, bad_mass, kcg, margin)


# ---------------------------------------------------------------------------
# distortion of convex cells

@dataclass(frozen=True)
class DistortionFactor:
    shape: str
    psi: np.ndarray
    quotient: float
    lower: float
    upper: float
    symmetric_lower: float

    @property
    def within_bounds(self):
        return self.lower <= self.quotient * (1 + 1e-12) and self.quotient <= self.upper * (1 + 1e-12)


def john_distortion(shape, size, dim=None):
    """Linear map ``Psi`` and ``|Psi(Q)| / diam(Psi(Q))^d`` for simple convex cells.

    ``shape`` is ``cube`` (side), ``rectangle`` (side vector), ``ball``
    (radius) or ``ellipsoid`` (semi-axis vector).
    """
    if shape in ("cube", "ball"):
        if dim is None:
            raise UnsupportedShape("dimension required")
        d = dim
        psi = np.eye(d)
        if shape == "cube":
            q = 1.0 / d ** (d / 2)
        else:
            q = unit_ball_volume(d) / 2 ** d
    elif shape in ("rectangle", "ellipsoid"):
        sides = np.asarray(size, float)
        d = len(sides)
        psi = np.diag(1.0 / sides)
        q = 1.0 / d ** (d / 2) if shape == "rectangle" else unit_ball_volume(d) / 2 ** d
    else:
        raise UnsupportedShape(f"unsupported cell shape {shape!r}")
    tau = unit_ball_volume(d)
    lower = tau / (2 ** d * d ** d)
    upper = tau / 2 ** (d / 2)
    sym = tau / (4 * d) ** (d / 2)
    return DistortionFactor(shape, psi, q, lower, upper, sym)
