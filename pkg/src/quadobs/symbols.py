"""Quadratic symbols on phase space and their Hamilton maps.

A quadratic symbol is ``q(x, xi) = sum c[alpha, beta] x**alpha xi**beta``
with ``|alpha| + |beta| = 2``.  Internally every symbol also carries its
symmetric *form* ``M`` (a complex ``2d x 2d`` matrix) with
``q(X) = X.T @ M @ X`` for ``X = (x, xi)``.

Index sets (``I``, ``J``) are zero-based tuples in the Python API.  The
JSON documents produced by :mod:`quadobs.cli` use one-based indices.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateTolerance,
    HypothesisViolated,
    NonQuadraticTerm,
    NotAxisAligned,
    NotPSD,
    RealPartNotNonpositive,
)

RANK_TOL = 1e-10
AXIS_TOL = 1e-8


def _normalize_key(key, dim):
    alpha, beta = key
    alpha = tuple(int(a) for a in alpha)
    beta = tuple(int(b) for b in beta)
    if len(alpha) != dim or len(beta) != dim:
        raise NonQuadraticTerm(f"multi-index length must be {dim}: {key!r}")
    if min(alpha + beta) < 0 or sum(alpha) + sum(beta) != 2:
        raise NonQuadraticTerm(f"term {key!r} is not of total degree 2")
    return alpha, beta


def _form_from_coeffs(dim, coeffs):
    form = np.zeros((2 * dim, 2 * dim), dtype=complex)
    for (alpha, beta), c in coeffs.items():
        idx = [i for i, a in enumerate(alpha) for _ in range(a)]
        idx += [dim + i for i, b in enumerate(beta) for _ in range(b)]
        i, j = idx
        if i == j:
            form[i, i] += c
        else:
            form[i, j] += c / 2
            form[j, i] += c / 2
    return form


def _coeffs_from_form(form):
    n = form.shape[0]
    dim = n // 2
    coeffs = {}
    for i in range(n):
        for j in range(i, n):
            c = form[i, i] if i == j else form[i, j] + form[j, i]
            if c == 0:
                continue
            alpha = [0] * dim
            beta = [0] * dim
            for k in (i, j):
                if k < dim:
                    alpha[k] += 1
                else:
                    beta[k - dim] += 1
            coeffs[(tuple(alpha), tuple(beta))] = complex(c)
    return coeffs


@dataclass(frozen=True)
class QuadraticSymbol:
    """Validated quadratic symbol with ``Re q <= 0``.

    Build instances with :func:`build_symbol`; the constructor itself does
    not validate.
    """

    dim: int
    terms: tuple
    form: np.ndarray = field(repr=False, compare=False)
    real_part_max: float = field(default=0.0, compare=False)

    @property
    def coeffs(self):
        return dict(self.terms)

    def __call__(self, x, xi):
        """Evaluate ``q`` at points; ``x`` and ``xi`` have shape (..., d)."""
        X = np.concatenate([np.asarray(x, float), np.asarray(xi, float)], axis=-1)
        return np.einsum("...i,ij,...j->...", X, self.form, X)

    def scaled(self, factor):
        return build_symbol(self.dim, {k: factor * v for k, v in self.terms})

    def to_document(self):
        terms = []
        for (alpha, beta), c in self.terms:
            terms.append({"x": list(alpha), "xi": list(beta),
                          "re": float(c.real), "im": float(c.imag)})
        return {"dim": self.dim, "terms": terms}


def build_symbol(dim, coeffs, tol=1e-12):
    """Validate a coefficient map ``{(alpha, beta): c}`` into a symbol.

    Raises
    ------
    NonQuadraticTerm
        If some key does not have total degree two.
    RealPartNotNonpositive
        If the real part of the form has a positive eigenvalue larger than
        ``tol`` times its spectral norm.
    """
    dim = int(dim)
    if dim < 1:
        raise NonQuadraticTerm("dimension must be positive")
    merged = {}
    for key, c in coeffs.items():
        k = _normalize_key(key, dim)
        merged[k] = merged.get(k, 0j) + complex(c)
    merged = {k: v for k, v in merged.items() if v != 0}
    form = _form_from_coeffs(dim, merged)
    re_form = form.real
    eig = np.linalg.eigvalsh(re_form)
    scale = max(abs(eig[0]), abs(eig[-1]))
    top = float(eig[-1])
    if scale > 0 and top > tol * scale:
        raise RealPartNotNonpositive(
            f"Re q has positive eigenvalue {top:.3e} (scale {scale:.3e})")
    terms = tuple(sorted(merged.items()))
    return QuadraticSymbol(dim, terms, form, top)


def symbol_from_form(form):
    form = np.asarray(form, dtype=complex)
    form = (form + form.T) / 2
    return build_symbol(form.shape[0] // 2, _coeffs_from_form(form))


def symbol_from_document(doc):
    dim = int(doc["dim"])
    coeffs = {}
    for t in doc["terms"]:
        key = (tuple(t["x"]), tuple(t["xi"]))
        coeffs[key] = coeffs.get(key, 0j) + complex(t.get("re", 0.0), t.get("im", 0.0))
    return build_symbol(dim, coeffs)


def adjoint_symbol(q):
    """Symbol of the adjoint operator: entrywise complex conjugation."""
    return build_symbol(q.dim, {k: np.conj(c) for k, c in q.terms})


def oscillator_symbol(dim, I, J):
    """Symbol ``-|xi_J|^2 - |x_I|^2`` of the negated partial oscillator."""
    coeffs = {}
    for i in I:
        e = tuple(2 if k == i else 0 for k in range(dim))
        coeffs[(e, (0,) * dim)] = -1.0
    for j in J:
        e = tuple(2 if k == j else 0 for k in range(dim))
        coeffs[((0,) * dim, e)] = -1.0
    return build_symbol(dim, coeffs)


# ---------------------------------------------------------------------------
# Hamilton map and singular space

@dataclass(frozen=True)
class HamiltonMap:
    dim: int
    matrix: np.ndarray

    @property
    def re_part(self):
        return self.matrix.real.copy()

    @property
    def im_part(self):
        return self.matrix.imag.copy()


def hamilton_map(q):
    """Hamilton map of ``q``.

    With the Hessian blocks of ``q`` written in terms of the form ``M``
    (Hessian = ``2 M``) this is::

        F = [[ M_xi,x   M_xi,xi ],
             [ -M_x,x  -M_x,xi  ]]
    """
    d = q.dim
    M = q.form
    F = np.empty((2 * d, 2 * d), dtype=complex)
    F[:d, :d] = M[d:, :d]
    F[:d, d:] = M[d:, d:]
    F[d:, :d] = -M[:d, :d]
    F[d:, d:] = -M[:d, d:]
    return HamiltonMap(d, F)


def _kernel(mat, tol):
    """Orthonormal kernel basis (columns), relative rank cut and gap."""
    n = mat.shape[1]
    if mat.size == 0 or not np.any(mat):
        return np.eye(n), np.inf
    _, s, vh = np.linalg.svd(mat)
    rel = s / s[0]
    rank = int(np.sum(rel > tol))
    kept = rel[rank - 1] if rank > 0 else np.inf
    dropped = rel[rank] if rank < len(rel) else 0.0
    gap = kept - dropped
    return vh[rank:].conj().T.real.copy(), gap


@dataclass(frozen=True)
class ProductStructure:
    """Splitting of the orthogonal complement of the singular space.

    ``I`` and ``J`` are zero-based coordinate sets with
    ``S^perp = R^d_I x R^d_J`` after applying ``rotation`` (``None`` when
    the splitting is already axis-aligned).
    """

    I: tuple
    J: tuple
    rotation: Optional[np.ndarray] = None
    overlap: int = 0


@dataclass(frozen=True)
class SingularSpaceReport:
    basis: np.ndarray
    k0: int
    chain_dims: tuple
    product: Optional[ProductStructure]
    flags: tuple = ()

    @property
    def dim(self):
        return self.basis.shape[0] // 2

    def projector(self):
        B = self.basis
        return B @ B.T

    def complement_projector(self):
        return np.eye(self.basis.shape[0]) - self.projector()

    def to_document(self):
        prod = None
        if self.product is not None:
            prod = {"I": [i + 1 for i in self.product.I],
                    "J": [j + 1 for j in self.product.J]}
            if self.product.rotation is not None:
                prod["rotation"] = self.product.rotation.tolist()
        return {"S_basis": self.basis.T.tolist(), "k0": self.k0,
                "product": prod, "flags": list(self.flags)}


def singular_space(F, tol=RANK_TOL, strict=False):
    """Real intersection of ``ker[Re F (Im F)^j]`` for ``j < 2d``.

    The kernel chain uses stacked real matrices, so the intersection is
    real by construction.  ``k0`` is the first index at which the partial
    intersection already equals the full one.  A rank cut whose singular
    value gap is below ``10 * tol`` adds the ``"degenerate-tolerance"``
    flag (or raises :class:`DegenerateTolerance` when ``strict``).
    """
    if isinstance(F, QuadraticSymbol):
        F = hamilton_map(F)
    n = 2 * F.dim
    re, im = F.matrix.real, F.matrix.imag
    rows = []
    block = re.copy()
    dims = []
    kernels = []
    flags = []
    for _ in range(n):
        rows.append(block)
        ker, gap = _kernel(np.vstack(rows), tol)
        if gap < 10 * tol:
            if strict:
                raise DegenerateTolerance(f"singular value gap {gap:.2e} at rank cut")
            if "degenerate-tolerance" not in flags:
                flags.append("degenerate-tolerance")
        dims.append(ker.shape[1])
        kernels.append(ker)
        block = block @ im
    final = dims[-1]
    k0 = next(k for k, dk in enumerate(dims) if dk == final)
    basis = kernels[-1]
    report = SingularSpaceReport(basis, k0, tuple(dims), None, tuple(flags))
    prod = detect_product(report)
    if prod is None:
        flags.append("not-a-product")
    elif prod.rotation is not None:
        flags.append("rotated")
    return SingularSpaceReport(basis, k0, tuple(dims), prod, tuple(flags))


def _range_basis(P, tol=0.5):
    w, v = np.linalg.eigh((P + P.T) / 2)
    return v[:, w > tol]


def _coordinate_set(P, tol):
    d = P.shape[0]
    diag = np.diag(P)
    off = P - np.diag(diag)
    if np.max(np.abs(off), initial=0.0) >= tol:
        return None
    ones = np.abs(diag - 1) < tol
    zeros = np.abs(diag) < tol
    if not np.all(ones | zeros):
        return None
    return tuple(i for i in range(d) if ones[i])


def detect_product(report, tol=AXIS_TOL):
    """Split ``S^perp`` as ``V x W`` (position block times momentum block).

    Returns a :class:`ProductStructure` or ``None`` when ``S^perp`` is not
    a product.  For non axis-aligned products an orthogonal ``R`` with
    ``R V = R^d_I`` and ``R W = R^d_J`` is returned, ordered so that
    ``I = {0..d1-1}`` and ``J = {d1-l..d1+d2-l-1}`` with ``l = dim(V & W)``.
    Such an ``R`` exists only when the projectors onto ``V`` and ``W``
    commute; otherwise ``None`` is returned as well.
    """
    d = report.dim
    P = report.complement_projector()
    if np.max(np.abs(P[:d, d:]), initial=0.0) >= tol:
        return None
    PV, PW = P[:d, :d], P[d:, d:]
    I = _coordinate_set(PV, tol)
    J = _coordinate_set(PW, tol)
    if I is not None and J is not None:
        return ProductStructure(I, J, None, len(set(I) & set(J)))
    if np.max(np.abs(PV @ PW - PW @ PV)) >= tol:
        return None
    both = PV @ PW
    pieces = [PV - both, both, PW - both, np.eye(d) - PV - PW + both]
    bases = [_range_basis(p) for p in pieces]
    R = np.hstack(bases).T
    d1 = bases[0].shape[1] + bases[1].shape[1]
    l = bases[1].shape[1]
    d2 = l + bases[2].shape[1]
    return ProductStructure(tuple(range(d1)), tuple(range(d1 - l, d1 + d2 - l)), R, l)


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck builders

def _check_psd(name, A, tol=1e-10):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotPSD(f"{name} must be square")
    if np.max(np.abs(A - A.T), initial=0.0) > tol * max(1.0, np.abs(A).max()):
        raise NotPSD(f"{name} is not symmetric")
    w = np.linalg.eigvalsh((A + A.T) / 2)
    if w.size and w[0] < -tol * max(1.0, abs(w[-1])):
        raise NotPSD(f"{name} has eigenvalue {w[0]:.3e} < 0")
    return (A + A.T) / 2


@dataclass(frozen=True)
class OUSpec:
    """Matrices of ``1/2 Tr(Q grad^2) - 1/2 Rx.x - Bx.grad - 1/2 Tr B`` (Weyl ordering)."""

    Q: np.ndarray
    R: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        Q = _check_psd("Q", self.Q)
        R = _check_psd("R", self.R)
        B = np.asarray(self.B, dtype=float)
        if not (Q.shape == R.shape == B.shape):
            raise NotPSD("Q, R, B must share one shape")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "B", B)

    @property
    def dim(self):
        return self.Q.shape[0]

    @property
    def trace_B(self):
        return float(np.trace(self.B))

    @property
    def trace_factor(self):
        """Constant factor ``exp(-Tr B / 2)`` dropped from the semigroup."""
        return float(np.exp(-self.trace_B / 2))


def ou_symbol(spec):
    """``q = -1/2 Q xi.xi - 1/2 R x.x - i B x.xi``.

    The trace of ``B`` only contributes a constant to the operator, so it
    is not part of the quadratic symbol; see :attr:`OUSpec.trace_factor`.
    """
    d = spec.dim
    form = np.zeros((2 * d, 2 * d), dtype=complex)
    form[:d, :d] = -spec.R / 2
    form[d:, d:] = -spec.Q / 2
    form[d:, :d] = -0.5j * spec.B
    form[:d, d:] = -0.5j * spec.B.T
    return symbol_from_form(form)


def _psd_sqrt(Q, tol=1e-10):
    Q = np.asarray(Q, dtype=float)
    w, v = np.linalg.eigh((Q + Q.T) / 2)
    if w.size and w[0] < -tol * max(1.0, abs(w[-1])):
        raise NotPSD(f"Q has eigenvalue {w[0]:.3e} < 0")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def _rank(mat, tol=RANK_TOL):
    if not np.any(mat):
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


def kalman_rank(Q, B):
    """Rank of ``(Q^1/2, B Q^1/2, ..., B^(d-1) Q^1/2)``."""
    S = _psd_sqrt(Q)
    B = np.asarray(B, dtype=float)
    d = S.shape[0]
    blocks = [S]
    for _ in range(d - 1):
        blocks.append(B @ blocks[-1])
    return _rank(np.hstack(blocks))


def ou_predict_I(spec):
    """Coordinate set ``I`` with ``(cap_j ker R B^j)^perp = R^d_I``."""
    d = spec.dim
    if kalman_rank(spec.Q, spec.B) != d:
        raise HypothesisViolated("Kalman rank condition fails")
    blocks = [spec.R]
    for _ in range(d - 1):
        blocks.append(blocks[-1] @ spec.B)
    ker, _ = _kernel(np.vstack(blocks), RANK_TOL)
    P = np.eye(d) - ker @ ker.T
    I = _coordinate_set(P, AXIS_TOL)
    if I is None:
        raise NotAxisAligned("kernel complement is not a coordinate subspace")
    return I


def kolmogorov_spec(m):
    """Kolmogorov matrices in dimension ``2m``."""
    d = 2 * m
    Q = np.zeros((d, d))
    Q[m:, m:] = 2 * np.eye(m)
    B = np.zeros((d, d))
    B[:m, m:] = -np.eye(m)
    return OUSpec(Q, np.zeros((d, d)), B)


def kfp_spec(m, I1=()):
    """Kramers-Fokker-Planck matrices in dimension ``2m``.

    ``I1`` (zero-based, subset of ``range(m)``) lists the position
    directions confined by the quadratic external potential.
    """
    d = 2 * m
    Q = np.zeros((d, d))
    Q[m:, m:] = 2 * np.eye(m)
    R = np.zeros((d, d))
    R[m:, m:] = 0.5 * np.eye(m)
    B = np.zeros((d, d))
    B[:m, m:] = np.eye(m)
    for i in I1:
        B[m + i, i] = -1.0
    return OUSpec(Q, R, B)
