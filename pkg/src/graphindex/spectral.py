"""Finite element discretization of the index form on a metric graph.

Each edge carries C^1 piecewise-cubic Hermite elements with value and slope
degrees of freedom (``d`` each) at every node.  For a boundary Lagrangian
``Lambda = {(p~, q) : q = U r, U^T p~ = S r}`` the index form becomes

    I(u, u) - <S r, r>,   with endpoint values constrained to ``U r``,

so the configuration part of ``Lambda`` is essential and the momentum part
natural.  Half-lines are truncated at a horizon where the exact decaying-data
Lagrangian closes the problem.

Morse indices are inertia counts of ``A + eps0 M`` (Sylvester), evaluated by
a banded LDL^T sweep after reverse Cuthill-McKee reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .graph import (
    BOUNDED,
    MetricGraph,
    boundary_index,
    boundary_space,
    build_graph,
    split_lagrangian,
)
from .hamiltonian import DEFAULT_HORIZON, Constant, SLCoefficients, stable_subspace
from .kernels import banded_ldl_inertia
from .symplectic import LagrangianFrame, orthonormal_basis

EPS_KERNEL = 1e-8
DEFAULT_MESH = 32
MAX_REFINEMENTS = 4
DENSE_LIMIT = 600


class SpectralError(RuntimeError):
    """Discretization or eigensolver failure."""


_XI, _WQ = leggauss(5)
_XI = 0.5 * (_XI + 1.0)
_WQ = 0.5 * _WQ


def _hermite(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reference Hermite cubics and their xi-derivatives, shape ``(len(xi), 4)``."""
    x2, x3 = xi ** 2, xi ** 3
    phi = np.stack([1 - 3 * x2 + 2 * x3, xi - 2 * x2 + x3, 3 * x2 - 2 * x3, -x2 + x3], -1)
    dphi = np.stack([-6 * xi + 6 * x2, 1 - 4 * xi + 3 * x2, 6 * xi - 6 * x2,
                     -2 * xi + 3 * x2], -1)
    return phi, dphi


_PHI, _DPHI = _hermite(_XI)


# ---------------------------------------------------------------------------
# Truncation of half-lines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Truncation:
    """A compact graph standing in for ``g`` plus the extended Lagrangian."""

    graph: MetricGraph
    lagrangian: LagrangianFrame
    horizon: float


def truncate(g: MetricGraph, lagrangian: LagrangianFrame, c: SLCoefficients,
             s: float = 0.0, horizon: float = DEFAULT_HORIZON) -> Truncation:
    """Cut half-lines at distance ``horizon`` and close them with decaying data.

    The far end of a right half-line ``[a, oo)`` becomes ``a + horizon`` with the
    Lagrangian of data of solutions that decay at ``+oo``; left half-lines are
    treated symmetrically.  Bounded parts of ``lagrangian`` are kept.
    """
    if g.compact:
        return Truncation(g, lagrangian, 0.0)
    doc = g.to_document()
    far_frames = {}
    for e_doc, e in zip(doc["edges"], g.edges):
        if e.kind == BOUNDED:
            continue
        if e.has_a:
            e_doc["interval"] = {"kind": BOUNDED, "a": e.a, "b": e.a + horizon}
            far_frames[e.id] = ("b", stable_subspace(c, e.id, e.a + horizon, s, horizon, 1))
        else:
            e_doc["interval"] = {"kind": BOUNDED, "a": e.b - horizon, "b": e.b}
            far_frames[e.id] = ("a", stable_subspace(c, e.id, e.b - horizon, s, horizon, -1))
    for v in doc["vertices"]:
        v["at_infinity"] = False
    inf_ids = {v.id for v in g.vertices if v.at_infinity}
    for vid in inf_ids:
        doc["conditions"][str(vid)] = {"type": "neumann"}
    gt = build_graph(doc)
    gt = type(gt)(gt.vertices, gt.edges, gt.fiber_dim, gt.conditions, g.coefficients, g.offset)

    # embed the original Lagrangian and append the far-end frames
    space_t = boundary_space(gt)
    d = g.fiber_dim
    row_map = _row_map(g, gt)
    cols = []
    emb = np.zeros((space_t.dim, lagrangian.basis.shape[1]))
    emb[row_map] = lagrangian.basis
    cols.append(emb)
    p_t, q_t, _ = boundary_index(gt)
    for eid, (end, frame) in far_frames.items():
        slot = next(sl for sl in gt.slots[0] + gt.slots[1] if sl.edge == eid and sl.end == end)
        k = gt.config_rows(slot)
        v = np.zeros((space_t.dim, d))
        v[p_t[k]] = frame.basis[:d]
        v[q_t[k]] = frame.basis[d:]
        cols.append(v)
    lt = LagrangianFrame(space_t, orthonormal_basis(np.hstack(cols)))
    lt.assert_lagrangian(1e-7)
    return Truncation(gt, lt, horizon)


def _row_map(g: MetricGraph, gt: MetricGraph) -> np.ndarray:
    """Rows of ``boundary_space(gt)`` matching each row of ``boundary_space(g)``."""
    p_g, q_g, _ = boundary_index(g)
    p_t, q_t, _ = boundary_index(gt)
    out = np.empty(2 * g.config_dim, dtype=int)
    slots_t = {(sl.edge, sl.end): sl for sl in gt.slots[0] + gt.slots[1]}
    for sl in g.slots[0] + g.slots[1]:
        kg = g.config_rows(sl)
        kt = gt.config_rows(slots_t[(sl.edge, sl.end)])
        out[p_g[kg]] = p_t[kt]
        out[q_g[kg]] = q_t[kt]
    return out


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretizedOperator:
    """Reduced stiffness and mass matrices of the index form."""

    graph: MetricGraph = field(repr=False)
    coeffs: SLCoefficients = field(repr=False)
    lagrangian: LagrangianFrame = field(repr=False)
    s: float
    mesh_n: int
    horizon: float
    A: sp.csr_matrix = field(repr=False)
    M: sp.csr_matrix = field(repr=False)
    T: sp.csr_matrix = field(repr=False)
    A_full: sp.csr_matrix = field(repr=False)
    M_full: sp.csr_matrix = field(repr=False)
    nodes: dict = field(repr=False)
    offsets: dict = field(repr=False)
    compact_graph: MetricGraph = field(repr=False)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def refined(self, factor: int = 2) -> "DiscretizedOperator":
        return assemble(self.graph, self.coeffs, self.lagrangian, self.mesh_n * factor,
                        self.s, self.horizon)

    def with_horizon(self, horizon: float) -> "DiscretizedOperator":
        return assemble(self.graph, self.coeffs, self.lagrangian, self.mesh_n, self.s,
                        horizon)

    def at(self, s: float) -> "DiscretizedOperator":
        return assemble(self.graph, self.coeffs, self.lagrangian, self.mesh_n, s,
                        self.horizon)

    def edge_values(self, y: np.ndarray) -> dict:
        """Nodal values of a reduced vector on every edge: ``{edge: (nodes, values)}``."""
        x = self.T @ y
        d = self.graph.fiber_dim
        out = {}
        for eid, nodes in self.nodes.items():
            off = self.offsets[eid]
            blk = x[off:off + 2 * d * len(nodes)].reshape(len(nodes), 2, d)
            out[eid] = (nodes, blk[:, 0, :])
        return out


def edge_mesh(length: float, mesh_n: int, rate: float = 0.0) -> int:
    """Element count: ``mesh_n`` per unit length, enough to resolve ``rate``."""
    n = int(math.ceil(mesh_n * max(length, 1.0)))
    n = max(n, int(math.ceil(length * math.sqrt(max(rate, 0.0)) * 2.0)))
    return max(n, 4)


def _edge_matrices(ec, a: float, b: float, n_el: int, s: float
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element stiffness and mass blocks ``(n_el, 4d, 4d)`` on a uniform mesh."""
    d = ec.d
    nodes = np.linspace(a, b, n_el + 1)
    h = np.diff(nodes)
    xq = nodes[:-1, None] + h[:, None] * _XI[None, :]
    scale = np.array([1.0, 0.0, 1.0, 0.0])
    hs = h[:, None]
    nv = _PHI[None] * (scale + (1 - scale) * hs)[:, None, :]          # (n,5,4)
    dv = _DPHI[None] * ((1 - scale) + scale / hs)[:, None, :]         # (n,5,4)
    w = _WQ[None, :] * hs                                              # (n,5)
    p, q, r = ec.P(xq), ec.Q(xq), ec.R(xq) + s * ec.C(xq)
    qt = np.swapaxes(q, -1, -2)
    k = (np.einsum("kq,kqi,kqj,kqab->kiajb", w, dv, dv, p)
         + np.einsum("kq,kqi,kqj,kqab->kiajb", w, dv, nv, q)
         + np.einsum("kq,kqi,kqj,kqab->kiajb", w, nv, dv, qt)
         + np.einsum("kq,kqi,kqj,kqab->kiajb", w, nv, nv, r))
    m = np.einsum("kq,kqi,kqj,ab->kiajb", w, nv, nv, np.eye(d))
    return nodes, k.reshape(n_el, 4 * d, 4 * d), m.reshape(n_el, 4 * d, 4 * d)


def assemble(g: MetricGraph, c: SLCoefficients, lagrangian: LagrangianFrame,
             mesh_n: int = DEFAULT_MESH, s: float = 0.0,
             horizon: float = DEFAULT_HORIZON) -> DiscretizedOperator:
    """Discretize the index form of ``(g, c)`` on the domain fixed by ``lagrangian``."""
    if lagrangian.space != boundary_space(g):
        raise SpectralError("Lagrangian does not live in the graph's boundary space")
    lagrangian.assert_lagrangian(1e-7)
    tr = truncate(g, lagrangian, c, s, horizon)
    gt, lt = tr.graph, tr.lagrangian
    d = gt.fiber_dim
    rows, cols, kdat, mdat = [], [], [], []
    nodes_of, offsets = {}, {}
    off = 0
    for e in gt.edges:
        ec = c[e.id]
        rate = float(np.abs(ec.R(np.linspace(e.a, e.b, 9))).max()) + abs(s) * float(
            np.abs(ec.C(np.linspace(e.a, e.b, 9))).max())
        n_el = edge_mesh(e.length, mesh_n, rate)
        nodes, ke, me = _edge_matrices(ec, e.a, e.b, n_el, s)
        loc = np.arange(4 * d)
        glob = off + 2 * d * np.arange(n_el)[:, None] + loc[None, :]   # (n_el, 4d)
        rows.append(np.repeat(glob, 4 * d, axis=1).ravel())
        cols.append(np.tile(glob, (1, 4 * d)).ravel())
        kdat.append(ke.ravel())
        mdat.append(me.ravel())
        nodes_of[e.id], offsets[e.id] = nodes, off
        off += 2 * d * (n_el + 1)
    n = off
    r_, c_ = np.concatenate(rows), np.concatenate(cols)
    a_full = sp.csr_matrix((np.concatenate(kdat), (r_, c_)), shape=(n, n))
    m_full = sp.csr_matrix((np.concatenate(mdat), (r_, c_)), shape=(n, n))
    a_full = 0.5 * (a_full + a_full.T)
    m_full = 0.5 * (m_full + m_full.T)

    # endpoint value DOFs in configuration order
    ends = np.empty(gt.config_dim, dtype=int)
    for sl in gt.slots[0] + gt.slots[1]:
        e = gt.edge_map[sl.edge]
        node = 0 if sl.end == "a" else len(nodes_of[e.id]) - 1
        ends[gt.config_rows(sl)] = offsets[e.id] + 2 * d * node + np.arange(d)
    u, smat = split_lagrangian(gt, lt)
    k = u.shape[1]
    free = np.setdiff1d(np.arange(n), ends)
    nf = len(free)
    t_rows = np.concatenate([free, np.repeat(ends, k)])
    t_cols = np.concatenate([np.arange(nf), np.tile(nf + np.arange(k), len(ends))])
    t_dat = np.concatenate([np.ones(nf), u.ravel()])
    tmat = sp.csr_matrix((t_dat, (t_rows, t_cols)), shape=(n, nf + k))
    a_red = (tmat.T @ a_full @ tmat).tocsr()
    if k:
        corr = sp.csr_matrix((smat.ravel(), (np.repeat(nf + np.arange(k), k),
                                             np.tile(nf + np.arange(k), k))),
                             shape=a_red.shape)
        a_red = a_red - corr
    m_red = (tmat.T @ m_full @ tmat).tocsr()
    a_red = (0.5 * (a_red + a_red.T)).tocsr()
    m_red = (0.5 * (m_red + m_red.T)).tocsr()
    if a_red.shape[0] == 0:
        raise SpectralError("constrained space is empty")
    return DiscretizedOperator(g, c, lagrangian, float(s), int(mesh_n), float(horizon),
                               a_red, m_red, tmat, a_full, m_full, nodes_of, offsets, gt)


# ---------------------------------------------------------------------------
# Eigenvalues and inertia
# ---------------------------------------------------------------------------


def eigenvalues(op: DiscretizedOperator, k: int = 6, return_vectors: bool = False):
    """The ``k`` smallest generalized eigenvalues of ``(A, M)``."""
    n = op.size
    k = min(k, n)
    a, m = op.A.toarray(), op.M.toarray()
    vals, vecs = sla.eigh(a, m, subset_by_index=[0, k - 1])
    res = np.linalg.norm(a @ vecs - (m @ vecs) * vals, axis=0)
    if np.any(res > 1e-8 * np.maximum(1.0, np.abs(vals)) * np.linalg.norm(vecs, axis=0)):
        raise SpectralError("eigensolver residual too large")
    return (vals, vecs) if return_vectors else vals


@dataclass(frozen=True)
class Band:
    """A permuted banded copy of a sparse symmetric matrix pair."""

    perm: np.ndarray
    bandwidth: int
    a: np.ndarray
    m: np.ndarray


def _to_band(mat: sp.csr_matrix, perm: np.ndarray, bw: int) -> np.ndarray:
    coo = mat[perm][:, perm].tocoo()
    keep = (coo.row >= coo.col) & (coo.row - coo.col <= bw)
    out = np.zeros((bw + 1, mat.shape[0]))
    out[coo.row[keep] - coo.col[keep], coo.col[keep]] = coo.data[keep]
    return out


def banded_pair(op: DiscretizedOperator) -> Band:
    pattern = (abs(op.A) + abs(op.M)).tocsr()
    perm = reverse_cuthill_mckee(pattern, symmetric_mode=True)
    coo = pattern[perm][:, perm].tocoo()
    bw = int(np.abs(coo.row - coo.col).max(initial=0))
    return Band(perm, bw, _to_band(op.A, perm, bw), _to_band(op.M, perm, bw))


def count_below(op: DiscretizedOperator, shift: float, band: Band | None = None) -> int:
    """Number of generalized eigenvalues strictly below ``shift``.

    Uses the inertia of ``A - shift M`` (Sylvester).  The banded LDL^T count is
    accepted when its smallest pivot is well away from zero; otherwise the
    eigenvalues of the banded matrix are computed directly.
    """
    n = op.size
    if n <= DENSE_LIMIT:
        ev = sla.eigh(op.A.toarray(), op.M.toarray(), eigvals_only=True)
        return int(np.sum(ev < shift))
    band = banded_pair(op) if band is None else band
    neg, zero, _, piv = banded_ldl_inertia(band.a, band.m, shift, 0.0)
    scale = float(np.abs(band.a[0]).max() + abs(shift) * np.abs(band.m[0]).max())
    if zero == 0 and piv > 1e-10 * scale:
        return int(neg)
    shifted = band.a - shift * band.m
    ev = sla.eigvals_banded(shifted, lower=True, select="v", select_range=(-np.inf, 0.0))
    return int(np.sum(ev < 0))


@dataclass(frozen=True)
class MorseResult:
    index: int
    mesh_sizes: tuple[int, ...]
    indices: tuple[int, ...]
    near_zero: tuple[float, ...]
    eps_kernel: float
    horizon: float = 0.0

    @property
    def indeterminate(self) -> bool:
        return len(self.near_zero) > 0


def near_zero_eigenvalues(op: DiscretizedOperator, eps: float = EPS_KERNEL) -> list[float]:
    """Eigenvalues within ``10 * eps`` of zero."""
    lo = count_below(op, -10 * eps)
    hi = count_below(op, 10 * eps)
    if hi == lo:
        return []
    if op.size <= 4 * DENSE_LIMIT:
        ev = sla.eigh(op.A.toarray(), op.M.toarray(), eigvals_only=True,
                      subset_by_index=[lo, hi - 1])
        return [float(x) for x in ev]
    return [0.0] * (hi - lo)


def morse_index_once(op: DiscretizedOperator, eps: float = EPS_KERNEL) -> int:
    return count_below(op, -eps)


def morse_index(op: DiscretizedOperator, eps: float = EPS_KERNEL,
                max_refinements: int = MAX_REFINEMENTS) -> MorseResult:
    """Morse index with mesh-doubling stabilization.

    The count of eigenvalues below ``-eps`` must agree on two consecutive
    meshes; for graphs with half-lines the horizon is doubled once more and
    must also agree.
    """
    sizes, counts = [op.mesh_n], [morse_index_once(op, eps)]
    cur = op
    for _ in range(max_refinements):
        cur = cur.refined()
        sizes.append(cur.mesh_n)
        counts.append(morse_index_once(cur, eps))
        if counts[-1] == counts[-2]:
            break
    else:
        raise SpectralError(f"Morse index did not stabilize: {counts} on meshes {sizes}")
    if not op.graph.compact:
        longer = cur.with_horizon(2 * cur.horizon)
        if morse_index_once(longer, eps) != counts[-1]:
            raise SpectralError("Morse index changed when doubling the horizon")
    return MorseResult(counts[-1], tuple(sizes), tuple(counts),
                       tuple(near_zero_eigenvalues(cur, eps)), eps, op.horizon)


# ---------------------------------------------------------------------------
# Spectral flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralFlowResult:
    value: int
    crossings: tuple[tuple[float, int], ...]  # (s, net change in the nonnegative count)
    grid: tuple[float, ...]
    counts: tuple[int, ...]


class OperatorFamily:
    """``s -> DiscretizedOperator`` on a common mesh and constraint space.

    When the operator depends affinely on ``s`` (compact graph, or half-lines
    whose coefficients do not depend on ``s``) the two endpoint assemblies are
    reused.
    """

    def __init__(self, g: MetricGraph, c: SLCoefficients, lagrangian: LagrangianFrame,
                 mesh_n: int = DEFAULT_MESH, horizon: float = DEFAULT_HORIZON):
        self.g, self.c, self.lagrangian = g, c, lagrangian
        self.mesh_n, self.horizon = mesh_n, horizon
        self._base = assemble(g, c, lagrangian, mesh_n, 0.0, horizon)
        self._affine = g.compact or all(
            isinstance(c[e.id].C, Constant) and not np.any(c[e.id].C.value)
            for e in g.edges if not e.bounded)
        if self._affine:
            one = assemble(g, c, lagrangian, mesh_n, 1.0, horizon)
            if one.A.shape != self._base.A.shape:
                raise SpectralError("family does not keep a fixed domain")
            self._slope = (one.A - self._base.A).tocsr()

    def __call__(self, s: float) -> DiscretizedOperator:
        if not self._affine:
            return assemble(self.g, self.c, self.lagrangian, self.mesh_n, s, self.horizon)
        b = self._base
        return DiscretizedOperator(b.graph, b.coeffs, b.lagrangian, float(s), b.mesh_n,
                                   b.horizon, (b.A + s * self._slope).tocsr(), b.M, b.T,
                                   b.A_full, b.M_full, b.nodes, b.offsets, b.compact_graph)


def spectral_flow(family: Callable[[float], DiscretizedOperator],
                  interval: tuple[float, float] = (0.0, 1.0), n_grid: int = 33,
                  eps: float = EPS_KERNEL, s_tol: float = 1e-6) -> SpectralFlowResult:
    """Net number of eigenvalues crossing zero upward along ``s``.

    The value is ``N(s0) - N(s1)`` with ``N`` the count of eigenvalues below
    ``-eps``: kernel directions at the endpoints count as nonnegative.  Sign
    changes between grid points are bisected to ``s_tol`` for the crossing
    table.  Interior grid points sitting within ``10 eps`` of a kernel are
    nudged.
    """
    s0, s1 = interval
    grid = list(np.linspace(s0, s1, n_grid))

    def count(s: float) -> int:
        return morse_index_once(family(s), eps)

    counts = []
    for i, s in enumerate(grid):
        if 0 < i < len(grid) - 1:
            op = family(s)
            if count_below(op, 10 * eps) != count_below(op, -10 * eps):
                s = s + 0.37 * (grid[1] - grid[0])
                grid[i] = s
        counts.append(count(s))
    crossings = []
    for i in range(len(grid) - 1):
        if counts[i] == counts[i + 1]:
            continue
        lo, hi, c_lo = grid[i], grid[i + 1], counts[i]
        while hi - lo > s_tol:
            mid = 0.5 * (lo + hi)
            c_mid = count(mid)
            if c_mid == c_lo:
                lo = mid
            else:
                hi = mid
        crossings.append((0.5 * (lo + hi), counts[i] - counts[i + 1]))
    return SpectralFlowResult(counts[0] - counts[-1], tuple(crossings), tuple(grid),
                              tuple(counts))


def segment_dirichlet_operator(omega: float = 0.0, d: int = 1, mesh_n: int = DEFAULT_MESH,
                               length: float = 1.0) -> DiscretizedOperator:
    """``-x'' - omega^2 x`` on ``[0, length]`` with Dirichlet ends (test helper)."""
    from .graph import dirichlet_lagrangian, segment

    g = segment(length, d)
    c = SLCoefficients.uniform(g, R=-omega * omega)
    return assemble(g, c, dirichlet_lagrangian(g), mesh_n)
