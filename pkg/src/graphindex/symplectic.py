"""Finite-dimensional symplectic linear algebra.

Conventions used throughout the package:

* A standard block of size ``2d`` is written in ``(p, q)`` ordering with
  ``J = [[0, -I], [I, 0]]`` and ``omega(x, y) = <J x, y>``.
* A :class:`SymplecticForm` is a direct sum of standard blocks, each carrying a
  sign ``+1`` or ``-1``.  The block with sign ``-1`` uses ``-J``.
* The configuration (``q``) coordinates of a form are the ``q`` halves of its
  blocks, in block order.

Subspaces are stored as orthonormal frames and compared through
:func:`gap_distance`, never through their bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

# Relative rank tolerance for singular values.
RANK_RTOL = 1e-8
# Principal angles with cosine above 1 - ANGLE_TOL count as intersections.
ANGLE_TOL = 1e-10
# Relative zero threshold for inertia counts.
INERTIA_RTOL = 1e-9
# Absolute zero floor for Q-forms built on orthonormal frames.
QFORM_ATOL = 1e-9
# Absolute tolerance for isotropy and symplecticity checks.
ISOTROPY_TOL = 1e-8
# Residual allowed when splitting a vector of alpha ^ (beta + gamma); intersections
# are accepted up to principal angles of about sqrt(2 ANGLE_TOL).
DECOMPOSITION_TOL = 1e-4


class SymplecticError(ValueError):
    """Raised when an input violates a symplectic precondition."""


# ---------------------------------------------------------------------------
# Basic subspace utilities
# ---------------------------------------------------------------------------


def orthonormal_basis(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the column span of ``a`` (rank revealed by SVD)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0))
    rank = int(np.sum(s > rtol * s[0]))
    return u[:, :rank]


def null_space(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the null space of ``a`` with a relative tolerance."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return np.eye(a.shape[1])
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    return vh[rank:].T.conj()


def orthogonal_complement(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of an orthonormal frame."""
    n = basis.shape[0]
    if basis.shape[1] == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(basis, mode="complete")
    return q[:, basis.shape[1]:]


def principal_cosines(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cosines of the principal angles between two orthonormal frames."""
    if u.shape[1] == 0 or v.shape[1] == 0:
        return np.zeros(0)
    s = np.linalg.svd(u.T @ v, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def intersect(u: np.ndarray, v: np.ndarray, angle_tol: float = ANGLE_TOL) -> np.ndarray:
    """Orthonormal basis of the intersection of two subspaces.

    Directions whose principal cosine exceeds ``1 - angle_tol`` are accepted.
    The returned vectors are the averages of the paired principal vectors, which
    keeps them symmetric in ``u`` and ``v``.
    """
    u = orthonormal_basis(u)
    v = orthonormal_basis(v)
    if u.shape[1] == 0 or v.shape[1] == 0:
        return np.zeros((u.shape[0], 0))
    a, s, bh = np.linalg.svd(u.T @ v, full_matrices=False)
    k = int(np.sum(s > 1.0 - angle_tol))
    if k == 0:
        return np.zeros((u.shape[0], 0))
    x = u @ a[:, :k]
    y = v @ bh[:k].T
    return orthonormal_basis(0.5 * (x + y))


def subspace_sum(*frames: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the sum of subspaces."""
    return orthonormal_basis(np.hstack(frames))


def gap_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Operator norm of the difference of the orthogonal projectors.

    Accepts bases or :class:`LagrangianFrame` objects.
    """
    u = u.basis if isinstance(u, LagrangianFrame) else orthonormal_basis(_as_basis(u))
    v = v.basis if isinstance(v, LagrangianFrame) else orthonormal_basis(_as_basis(v))
    if u.shape[0] != v.shape[0]:
        raise SymplecticError("gap_distance: ambient dimensions differ")
    if u.shape[1] != v.shape[1]:
        return 1.0
    if u.shape[1] == 0:
        return 0.0
    # equal dimensions: the projector gap is the sine of the largest principal angle
    s = np.linalg.svd(v - u @ (u.T @ v), compute_uv=False)
    return float(min(1.0, s[0]))


def _as_basis(x) -> np.ndarray:
    if isinstance(x, LagrangianFrame):
        return x.basis
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------------------
# Symplectic forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymplecticForm:
    """Direct sum of signed standard symplectic blocks.

    ``blocks`` holds pairs ``(d_i, sign_i)``; block ``i`` occupies ``2 d_i``
    consecutive coordinates ordered as ``(p_1..p_d, q_1..q_d)``.
    """

    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.blocks) == 0:
            raise SymplecticError("a symplectic form needs at least one block")
        for d, sign in self.blocks:
            if int(d) < 1 or sign not in (1, -1):
                raise SymplecticError(f"invalid block ({d}, {sign})")

    @property
    def dim(self) -> int:
        return 2 * sum(d for d, _ in self.blocks)

    @property
    def n(self) -> int:
        """Half dimension, the dimension of every Lagrangian subspace."""
        return self.dim // 2

    @cached_property
    def complex_structure(self) -> np.ndarray:
        """Orthogonal ``J~`` with ``J~^2 = -I`` and ``omega(x, y) = <J~ x, y>``."""
        mats = []
        for d, sign in self.blocks:
            j = np.zeros((2 * d, 2 * d))
            j[:d, d:] = -np.eye(d)
            j[d:, :d] = np.eye(d)
            mats.append(sign * j)
        return sla.block_diag(*mats)

    @cached_property
    def matrix_rep(self) -> np.ndarray:
        """Antisymmetric Gram matrix ``W`` with ``omega(x, y) = x^T W y``."""
        return self.complex_structure.T.copy()

    @cached_property
    def p_index(self) -> np.ndarray:
        idx, off = [], 0
        for d, _ in self.blocks:
            idx.extend(range(off, off + d))
            off += 2 * d
        return np.array(idx, dtype=int)

    @cached_property
    def q_index(self) -> np.ndarray:
        idx, off = [], 0
        for d, _ in self.blocks:
            idx.extend(range(off + d, off + 2 * d))
            off += 2 * d
        return np.array(idx, dtype=int)

    @cached_property
    def p_signs(self) -> np.ndarray:
        return np.concatenate([np.full(d, float(s)) for d, s in self.blocks])

    @cached_property
    def standardizer(self) -> np.ndarray:
        """Signed permutation sending this form to the standard one.

        The image coordinates are ``(P, Q)`` with all momenta first; blocks with
        sign ``-1`` have their momenta negated so the image form is standard.
        The matrix is orthogonal.
        """
        n = self.n
        s = np.zeros((self.dim, self.dim))
        s[np.arange(n), self.p_index] = self.p_signs
        s[n + np.arange(n), self.q_index] = 1.0
        return s

    def omega(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Evaluate the form; accepts vectors or matrices of column vectors."""
        return np.asarray(x).T @ self.matrix_rep @ np.asarray(y)

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix_rep))

    def __add__(self, other: "SymplecticForm") -> "SymplecticForm":
        return SymplecticForm(self.blocks + other.blocks)


def make_form(block_signs: Sequence[tuple[int, int]]) -> SymplecticForm:
    """Build a signed direct sum of standard forms from ``(d_i, sign_i)`` pairs."""
    blocks = tuple((int(d), int(s)) for d, s in block_signs)
    if not blocks:
        raise SymplecticError("empty block list")
    return SymplecticForm(blocks)


def standard_form(n: int) -> SymplecticForm:
    return make_form([(n, 1)])


def doubled_form(d: int) -> SymplecticForm:
    """The space ``(-Omega) + Omega`` used for graphs of symplectic maps."""
    return make_form([(d, -1), (d, 1)])


def symplectic_matrix_standard(n: int) -> np.ndarray:
    return standard_form(n).complex_structure


def is_symplectic(m: np.ndarray, tol: float = 1e-9) -> bool:
    d2 = m.shape[0]
    j = symplectic_matrix_standard(d2 // 2)
    return float(np.linalg.norm(m.T @ j @ m - j)) <= tol


def symplectic_residual(m: np.ndarray) -> float:
    """``||M^T J M - J||`` for the standard form of matching size."""
    j = symplectic_matrix_standard(m.shape[0] // 2)
    return float(np.linalg.norm(m.T @ j @ m - j))


# ---------------------------------------------------------------------------
# Lagrangian frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LagrangianFrame:
    """A Lagrangian subspace stored as an orthonormal ``2n x n`` frame."""

    space: SymplecticForm
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        object.__setattr__(self, "basis", b)
        b.setflags(write=False)

    @classmethod
    def from_span(cls, space: SymplecticForm, vectors: np.ndarray, check: bool = True,
                  tol: float = ISOTROPY_TOL) -> "LagrangianFrame":
        """Orthonormalize ``vectors`` and wrap them, validating by default."""
        vectors = np.asarray(vectors, dtype=float)
        if vectors.shape[0] != space.dim:
            raise SymplecticError(
                f"vectors live in dimension {vectors.shape[0]}, form has {space.dim}")
        frame = cls(space, orthonormal_basis(vectors))
        if check:
            frame.assert_lagrangian(tol)
        return frame

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def isotropy_residual(self) -> float:
        g = self.space.omega(self.basis, self.basis)
        return float(np.max(np.abs(g))) if g.size else 0.0

    def is_lagrangian(self, tol: float = ISOTROPY_TOL) -> bool:
        return self.dim == self.space.n and self.isotropy_residual() <= tol

    def assert_lagrangian(self, tol: float = ISOTROPY_TOL) -> None:
        if self.dim != self.space.n:
            raise SymplecticError(
                f"subspace has dimension {self.dim}, Lagrangian needs {self.space.n}")
        res = self.isotropy_residual()
        if res > tol:
            raise SymplecticError(f"subspace is not isotropic (residual {res:.3e})")

    def transformed(self, s: np.ndarray) -> "LagrangianFrame":
        """Image under a linear map, re-orthonormalized (no validation)."""
        return LagrangianFrame(self.space, orthonormal_basis(s @ self.basis))

    def unitary(self) -> np.ndarray:
        """Complex ``n x n`` unitary ``X + iY`` in standardized coordinates."""
        z = self.space.standardizer @ self.basis
        n = self.space.n
        return z[:n] + 1j * z[n:]

    def to_json(self) -> dict:
        return {"rows": int(self.basis.shape[0]), "cols": int(self.basis.shape[1]),
                "data": [float(x) for x in self.basis.ravel()]}


def dirichlet(space: SymplecticForm) -> LagrangianFrame:
    """All momenta free, all configurations zero: ``q = 0``."""
    b = np.zeros((space.dim, space.n))
    b[space.p_index, np.arange(space.n)] = 1.0
    return LagrangianFrame(space, b)


def neumann(space: SymplecticForm) -> LagrangianFrame:
    """All configurations free, all momenta zero: ``p = 0``."""
    b = np.zeros((space.dim, space.n))
    b[space.q_index, np.arange(space.n)] = 1.0
    return LagrangianFrame(space, b)


def conormal_lagrangian(w: np.ndarray, space: SymplecticForm | None = None) -> LagrangianFrame:
    """Conormal Lagrangian ``{(p, q) : q in W, p orthogonal to W}``.

    ``w`` is a basis (columns) of a subspace of the configuration space, whose
    coordinates are the ``q`` coordinates of ``space`` in block order.  Because
    the condition ``p in W^perp`` is invariant under ``p -> -p`` the result does
    not depend on the signs of the blocks.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    n = w.shape[0]
    if space is None:
        space = standard_form(n)
    if n != space.n:
        raise SymplecticError(
            f"subspace lives in R^{n}, configuration space is R^{space.n}")
    wb = orthonormal_basis(w)
    wp = orthogonal_complement(wb)
    basis = np.zeros((space.dim, n))
    k = wb.shape[1]
    basis[space.q_index, :k] = wb
    basis[space.p_index, k:] = wp
    return LagrangianFrame(space, basis)


def graph_lagrangian(m: np.ndarray, tol: float = 1e-9) -> LagrangianFrame:
    """The graph ``{(z, M z)}`` of a symplectic map in ``(-Omega) + Omega``."""
    m = np.asarray(m, dtype=float)
    d2 = m.shape[0]
    if m.shape != (d2, d2) or d2 % 2:
        raise SymplecticError("graph_lagrangian needs a square matrix of even size")
    res = symplectic_residual(m)
    if res > tol * max(1.0, np.linalg.norm(m) ** 2):
        raise SymplecticError(f"matrix is not symplectic (residual {res:.3e})")
    space = doubled_form(d2 // 2)
    return LagrangianFrame(space, orthonormal_basis(np.vstack([np.eye(d2), m])))


def direct_sum(*frames: LagrangianFrame) -> LagrangianFrame:
    """Direct sum of Lagrangians in the direct sum of their spaces."""
    space = frames[0].space
    for f in frames[1:]:
        space = space + f.space
    return LagrangianFrame(space, sla.block_diag(*[f.basis for f in frames]))


def intersection_dim(l1, l2, angle_tol: float = ANGLE_TOL) -> int:
    """Dimension of the intersection of two subspaces via principal cosines."""
    u, v = _as_basis(l1), _as_basis(l2)
    if isinstance(l1, LagrangianFrame) and isinstance(l2, LagrangianFrame):
        if l1.space != l2.space:
            raise SymplecticError("frames live in different symplectic spaces")
    if u.shape[0] != v.shape[0]:
        raise SymplecticError("dimension mismatch")
    return int(np.sum(principal_cosines(u, v) > 1.0 - angle_tol))


# ---------------------------------------------------------------------------
# Quadratic forms and indices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Inertia:
    n_plus: int
    n_minus: int
    n_zero: int
    borderline: int = 0

    @property
    def size(self) -> int:
        return self.n_plus + self.n_minus + self.n_zero

    @property
    def signature(self) -> int:
        return self.n_plus - self.n_minus

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_plus, self.n_minus, self.n_zero)


def inertia(q: np.ndarray, rtol: float = INERTIA_RTOL, scale: float | None = None,
            atol: float = 1e-12, sym_tol: float = 1e-6) -> Inertia:
    """Count positive, negative and zero eigenvalues of a symmetric matrix.

    The zero threshold is ``max(rtol * scale, atol)`` where ``scale`` defaults
    to the spectral norm of ``q``.  The absolute floor keeps forms that vanish up
    to rounding from being read as definite.  Eigenvalues within ten thresholds
    of zero but above it are reported in ``borderline``.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if q.size == 0:
        return Inertia(0, 0, 0)
    norm = float(np.linalg.norm(q, 2))
    asym = float(np.linalg.norm(q - q.T, 2))
    if asym > sym_tol * max(norm, 1e-300) and asym > 1e-12:
        raise SymplecticError(f"matrix is not symmetric (asymmetry {asym:.3e})")
    ev = np.linalg.eigvalsh(0.5 * (q + q.T))
    ref = norm if scale is None else scale
    eps = max(rtol * ref, atol)
    pos = int(np.sum(ev > eps))
    neg = int(np.sum(ev < -eps))
    border = int(np.sum((np.abs(ev) > eps) & (np.abs(ev) <= 10 * eps)))
    return Inertia(pos, neg, len(ev) - pos - neg, border)


def _check_same_space(*frames: LagrangianFrame) -> SymplecticForm:
    space = frames[0].space
    for f in frames[1:]:
        if f.space != space:
            raise SymplecticError("frames live in different symplectic spaces")
    return space


def q_form(alpha: LagrangianFrame, beta: LagrangianFrame, gamma: LagrangianFrame
           ) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic form ``Q(alpha, beta; gamma)[u] = omega(u, C u)``.

    Here ``u + C u`` lies in ``gamma`` with ``C u`` in ``beta``.  The form lives
    on ``alpha intersect (beta + gamma)``.  Returns ``(basis, matrix)`` where the
    matrix represents the form in that basis.
    """
    space = _check_same_space(alpha, beta, gamma)
    # drop the detected beta ^ gamma from gamma so that beta + gamma has the
    # dimension the intersection tolerance implies
    _, cosines, vh = np.linalg.svd(beta.basis.T @ gamma.basis)
    g_part = gamma.basis @ vh[int(np.sum(cosines > 1.0 - ANGLE_TOL)):].T
    bg = subspace_sum(beta.basis, g_part)
    dom = intersect(alpha.basis, bg)
    k = dom.shape[1]
    if k == 0:
        return dom, np.zeros((0, 0))
    sysm = np.hstack([g_part, -beta.basis])
    coef, *_ = np.linalg.lstsq(sysm, dom, rcond=None)
    resid = float(np.linalg.norm(sysm @ coef - dom))
    if resid > DECOMPOSITION_TOL:
        raise SymplecticError(f"q_form: decomposition residual {resid:.3e}")
    cu = beta.basis @ coef[g_part.shape[1]:]
    mat = space.omega(dom, cu)
    return dom, 0.5 * (mat + mat.T)


def triple_index(alpha: LagrangianFrame, beta: LagrangianFrame, gamma: LagrangianFrame) -> int:
    """Triple index ``n+ Q(alpha, beta; gamma) + dim(alpha^gamma) - dim(alpha^beta^gamma)``.

    The radical ``alpha^beta + alpha^gamma`` of ``Q`` is removed at the
    intersection tolerance before counting, so nearly intersecting frames are
    not counted both as an intersection and as a small positive eigenvalue.
    """
    dom, q = q_form(alpha, beta, gamma)
    ag = intersect(alpha.basis, gamma.basis)
    abg = intersect(ag, beta.basis)
    if q.size:
        radical = subspace_sum(intersect(alpha.basis, beta.basis), ag)
        if radical.shape[1]:
            keep = null_space((dom.T @ radical).T)
            q = keep.T @ q @ keep
    npos = inertia(q, atol=QFORM_ATOL).n_plus
    return npos + ag.shape[1] - abg.shape[1]


def triple_intersection_dim(alpha, beta, gamma) -> int:
    return intersect(intersect(_as_basis(alpha), _as_basis(beta)), _as_basis(gamma)).shape[1]


def triple_index_bound(alpha, beta, gamma) -> int:
    """Upper bound ``n - dim(a^b) - dim(b^g) + dim(a^b^g)`` for the triple index."""
    n = alpha.space.n
    return (n - intersection_dim(alpha, beta) - intersection_dim(beta, gamma)
            + triple_intersection_dim(alpha, beta, gamma))


def hormander_index(l1: LagrangianFrame, l2: LagrangianFrame,
                    m1: LagrangianFrame, m2: LagrangianFrame) -> int:
    """Hörmander index ``s(l1, l2; m1, m2)``.

    Both triple-index expressions are evaluated; disagreement is an internal
    consistency failure and raises.
    """
    first = triple_index(l1, l2, m2) - triple_index(l1, l2, m1)
    second = triple_index(l1, m1, m2) - triple_index(l2, m1, m2)
    if first != second:
        raise SymplecticError(
            f"Hörmander index expressions disagree: {first} versus {second}")
    return first


# ---------------------------------------------------------------------------
# Symplectic reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedSpace:
    """Coordinates on ``eps^omega / eps`` given by a symplectic basis.

    ``basis`` columns are ``(e_1..e_k, f_1..f_k)`` inside ``eps^omega`` with
    ``omega(e_i, f_j) = sign * delta_ij``; ``form`` is the standard form of
    size ``2k`` with that sign.  ``eps`` is an orthonormal frame of the isotropic
    subspace being divided out.
    """

    ambient: SymplecticForm
    eps: np.ndarray
    basis: np.ndarray
    form: SymplecticForm | None

    def coordinates(self, vectors: np.ndarray) -> np.ndarray:
        """Coordinates of vectors of ``eps^omega`` modulo ``eps``."""
        sysm = np.hstack([self.basis, self.eps])
        coef, *_ = np.linalg.lstsq(sysm, vectors, rcond=None)
        return coef[: self.basis.shape[1]]


def reduction_space(ambient: SymplecticForm, eps: np.ndarray,
                    complement: np.ndarray | None = None,
                    form: SymplecticForm | None = None) -> ReducedSpace:
    """Set up coordinates on ``eps^omega / eps``.

    Without ``complement`` a symplectic basis is computed from the orthogonal
    complement of ``eps + J~ eps``.  With ``complement`` (columns spanning a
    subspace of ``eps^omega`` transversal to ``eps``) and ``form`` the caller
    fixes the reduced coordinates; the restriction of ``omega`` to the
    complement must match ``form``.
    """
    eps = orthonormal_basis(np.asarray(eps, dtype=float).reshape(ambient.dim, -1))
    if eps.shape[1]:
        iso = float(np.max(np.abs(ambient.omega(eps, eps))))
        if iso > ISOTROPY_TOL:
            raise SymplecticError(f"subspace is not isotropic (residual {iso:.3e})")
    if complement is not None:
        complement = np.asarray(complement, dtype=float)
        if form is None:
            raise SymplecticError("a reduced form must accompany an explicit complement")
        gram = ambient.omega(complement, complement)
        if np.max(np.abs(gram - form.matrix_rep)) > 1e-8:
            raise SymplecticError("complement basis does not realise the given form")
        if eps.shape[1]:
            leak = float(np.max(np.abs(ambient.omega(eps, complement))))
            if leak > 1e-8:
                raise SymplecticError("complement is not inside eps^omega")
        return ReducedSpace(ambient, eps, complement, form)
    jt = ambient.complex_structure
    k_basis = orthogonal_complement(subspace_sum(eps, jt @ eps)) if eps.shape[1] \
        else np.eye(ambient.dim)
    es: list[np.ndarray] = []
    span = np.zeros((ambient.dim, 0))
    for col in k_basis.T:
        v = col - span @ (span.T @ col) if span.shape[1] else col.copy()
        nv = np.linalg.norm(v)
        if nv < 1e-6:
            continue
        v /= nv
        es.append(v)
        span = np.hstack([span, v[:, None], (jt @ v)[:, None]])
    e = np.array(es).T if es else np.zeros((ambient.dim, 0))
    f = jt @ e
    k = e.shape[1]
    red_form = standard_form(k) if k else None
    return ReducedSpace(ambient, eps, np.hstack([e, f]), red_form)


def symplectic_reduce(frame: LagrangianFrame, eps: np.ndarray | ReducedSpace,
                      complement: np.ndarray | None = None,
                      form: SymplecticForm | None = None) -> LagrangianFrame:
    """Reduce ``frame`` by an isotropic subspace: ``((L ^ eps^w) + eps) / eps``."""
    red = eps if isinstance(eps, ReducedSpace) else reduction_space(
        frame.space, eps, complement, form)
    if red.form is None:
        raise SymplecticError("reduction by a Lagrangian leaves a zero space")
    if red.eps.shape[1] == 0:
        coords = red.coordinates(frame.basis)
        return LagrangianFrame.from_span(red.form, coords)
    jt = frame.space.complex_structure
    eps_omega = orthogonal_complement(orthonormal_basis(jt @ red.eps))
    part = intersect(frame.basis, eps_omega)
    coords = red.coordinates(part)
    return LagrangianFrame.from_span(red.form, coords)


# ---------------------------------------------------------------------------
# Random generation helpers (used by tests and the verification harness)
# ---------------------------------------------------------------------------


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def lagrangian_from_unitary(space: SymplecticForm, u: np.ndarray) -> LagrangianFrame:
    """Lagrangian whose standardized frame is ``[Re U; Im U]``."""
    z = np.vstack([u.real, u.imag])
    return LagrangianFrame(space, orthonormal_basis(space.standardizer.T @ z))


def random_lagrangian(space: SymplecticForm, rng: np.random.Generator) -> LagrangianFrame:
    return lagrangian_from_unitary(space, random_unitary(space.n, rng))


def random_symplectic(n: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random symplectic matrix ``U exp(J S)`` for the standard form of size ``2n``."""
    s = rng.standard_normal((2 * n, 2 * n)) * scale
    s = 0.5 * (s + s.T)
    j = symplectic_matrix_standard(n)
    u = random_unitary(n, rng)
    o = np.block([[u.real, -u.imag], [u.imag, u.real]])
    return o @ sla.expm(j @ s)


def structured_lagrangians(space: SymplecticForm, count: int, rng: np.random.Generator,
                           angles: Iterable[float] = (0.0, np.pi / 4, np.pi / 2)
                           ) -> list[LagrangianFrame]:
    """Lagrangians sharing a random symplectic orthonormal basis.

    In the rotated basis each one is a product of lines ``cos t e_i + sin t f_i``
    with ``t`` drawn from ``angles``; such families intersect often, which is
    what identity tests need.
    """
    n = space.n
    u = random_unitary(n, rng)
    angles = np.asarray(list(angles))
    out = []
    for _ in range(count):
        t = rng.choice(angles, size=n)
        diag = np.exp(1j * t)
        out.append(lagrangian_from_unitary(space, u @ np.diag(diag)))
    return out
