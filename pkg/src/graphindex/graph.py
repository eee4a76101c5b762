"""Metric graphs, boundary traces and vertex conditions.

Layout conventions used by every other module:

* Edges are sorted by id.  Ids may be integers or strings; integers sort
  before strings.
* The boundary space is ``T*R^{N_a} + T*R^{N_b}`` with coordinates
  ``[p_a, q_a, p_b, q_b]``.  ``N_a = d * (number of finite left endpoints)``
  and ``N_b = d * (number of finite right endpoints)``, in edge order.  The
  a-block carries the sign ``-1`` and the b-block the sign ``+1``.
* Momenta are quasi-Wronskians ``x^[1] = P x' + Q x``.
* Vertex conditions are conormal Lagrangians ``{q in W, p~ in W^perp}`` in the
  signed momenta ``p~ = (-p_a, p_b)``.  Dirichlet is ``W = 0`` and Kirchhoff is
  the diagonal.  Since ``W^perp`` is a linear space the signs never matter for
  a single conormal, but the signed momenta make the layout symmetric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Any, Callable, Mapping, Sequence

import jsonschema
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .symplectic import (
    LagrangianFrame,
    SymplecticForm,
    make_form,
    orthogonal_complement,
    orthonormal_basis,
)

BOUNDED = "bounded"
RIGHT = "right-half-line"
LEFT = "left-half-line"
KINDS = (BOUNDED, RIGHT, LEFT)


class GraphValidationError(ValueError):
    """A graph document violates one or more invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _id_key(x) -> tuple:
    return (0, x, "") if isinstance(x, int) else (1, 0, str(x))


@dataclass(frozen=True)
class Vertex:
    id: Any
    at_infinity: bool = False


@dataclass(frozen=True)
class Edge:
    id: Any
    tail: Any
    head: Any
    kind: str
    a: float
    b: float

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def has_a(self) -> bool:
        return math.isfinite(self.a)

    @property
    def has_b(self) -> bool:
        return math.isfinite(self.b)

    @property
    def bounded(self) -> bool:
        return self.kind == BOUNDED


@dataclass(frozen=True)
class VertexCondition:
    """Condition at one vertex.

    ``kind`` is ``dirichlet``, ``kirchhoff``, ``neumann`` or ``conormal``.  For
    conormal conditions ``basis`` spans ``W`` inside the vertex's local
    configuration space (columns; rows follow the vertex's slots in global
    boundary order).
    """

    kind: str
    basis: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Slot:
    """A finite edge endpoint: ``d`` consecutive rows of its block."""

    edge: Any
    end: str  # "a" or "b"
    vertex: Any
    offset: int  # offset inside N_a or N_b


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    fiber_dim: int
    conditions: Mapping[Any, VertexCondition] = field(default_factory=dict)
    coefficients: Mapping[Any, dict] = field(default_factory=dict)
    offset: np.ndarray | None = field(default=None, repr=False)

    # -- structure ---------------------------------------------------------

    @cached_property
    def vertex_map(self) -> dict:
        return {v.id: v for v in self.vertices}

    @cached_property
    def edge_map(self) -> dict:
        return {e.id: e for e in self.edges}

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def finite_vertices(self) -> list:
        return [v.id for v in self.vertices if not v.at_infinity]

    @property
    def compact(self) -> bool:
        return all(e.bounded for e in self.edges)

    def degree(self, vid) -> int:
        return sum((e.tail == vid) + (e.head == vid) for e in self.edges)

    @cached_property
    def slots(self) -> tuple[list[Slot], list[Slot]]:
        """Finite endpoint slots of the a-block and the b-block."""
        d = self.fiber_dim
        a_slots, b_slots = [], []
        for e in self.edges:
            if e.has_a:
                a_slots.append(Slot(e.id, "a", e.tail, d * len(a_slots)))
        for e in self.edges:
            if e.has_b:
                b_slots.append(Slot(e.id, "b", e.head, d * len(b_slots)))
        return a_slots, b_slots

    @property
    def n_a(self) -> int:
        return self.fiber_dim * len(self.slots[0])

    @property
    def n_b(self) -> int:
        return self.fiber_dim * len(self.slots[1])

    @property
    def config_dim(self) -> int:
        return self.n_a + self.n_b

    def config_rows(self, slot: Slot) -> np.ndarray:
        """Rows of the configuration vector ``(q_a, q_b)`` owned by a slot."""
        base = slot.offset if slot.end == "a" else self.n_a + slot.offset
        return base + np.arange(self.fiber_dim)

    def vertex_slots(self, vid) -> list[Slot]:
        a_slots, b_slots = self.slots
        return [s for s in a_slots + b_slots if s.vertex == vid]

    def to_document(self) -> dict:
        """Graph description document that round-trips through ``build_graph``."""
        verts = [{"id": v.id, "at_infinity": v.at_infinity} for v in self.vertices]
        edges = []
        for e in self.edges:
            iv: dict[str, Any] = {"kind": e.kind}
            if e.has_a:
                iv["a"] = e.a
            if e.has_b:
                iv["b"] = e.b
            edges.append({"id": e.id, "tail": e.tail, "head": e.head, "interval": iv})
        conds = {}
        for vid, c in self.conditions.items():
            entry: dict[str, Any] = {"type": c.kind}
            if c.kind == "conormal":
                entry["basis"] = np.asarray(c.basis).T.tolist()
            conds[str(vid)] = entry
        doc = {"fiber_dim": self.fiber_dim, "vertices": verts, "edges": edges,
               "conditions": conds}
        if self.coefficients:
            doc["coefficients"] = {str(k): v for k, v in self.coefficients.items()}
        return doc


# ---------------------------------------------------------------------------
# Construction and validation
# ---------------------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("graphindex").joinpath("data/graph.schema.json").read_text()
    return json.loads(text)


def _parse_interval(iv: dict) -> tuple[str, float, float]:
    kind = iv["kind"]
    if kind == BOUNDED:
        return kind, float(iv["a"]), float(iv["b"])
    if kind == RIGHT:
        return kind, float(iv.get("a", 0.0)), math.inf
    return kind, -math.inf, float(iv.get("b", 0.0))


def _parse_condition(raw, violations: list[str], vid, local_dim: int) -> VertexCondition:
    kind = raw if isinstance(raw, str) else raw.get("type")
    if kind in ("dirichlet", "kirchhoff", "neumann"):
        return VertexCondition(kind)
    basis = np.asarray(raw.get("basis", []), dtype=float)
    if basis.size == 0:
        basis = np.zeros((local_dim, 0))
    else:
        basis = np.atleast_2d(basis).T
    if basis.shape[0] != local_dim:
        violations.append(
            f"vertex {vid!r}: conormal basis vectors have length {basis.shape[0]}, "
            f"expected degree*fiber_dim = {local_dim}")
    return VertexCondition("conormal", basis)


def validate_document(doc: dict) -> list[str]:
    """Schema and invariant violations of a graph document (empty if valid)."""
    schema_errors = sorted(
        jsonschema.Draft202012Validator(load_schema()).iter_errors(doc),
        key=lambda e: list(e.absolute_path))
    if schema_errors:
        return [f"schema: {'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                for e in schema_errors]
    violations: list[str] = []
    vids = [v["id"] for v in doc["vertices"]]
    if len(set(map(str, vids))) != len(vids):
        violations.append("duplicate vertex ids")
    eids = [e["id"] for e in doc["edges"]]
    if len(set(map(str, eids))) != len(eids):
        violations.append("duplicate edge ids")
    inf = {v["id"]: bool(v.get("at_infinity", False)) for v in doc["vertices"]}
    degree = {v: 0 for v in inf}
    for e in doc["edges"]:
        for end in ("tail", "head"):
            if e[end] not in inf:
                violations.append(f"edge {e['id']!r}: unknown {end} vertex {e[end]!r}")
            else:
                degree[e[end]] += 1
        kind, a, b = _parse_interval(e["interval"])
        if not b - a > 0:
            violations.append(f"edge {e['id']!r}: nonpositive length {b - a}")
        tail_inf = inf.get(e["tail"], False)
        head_inf = inf.get(e["head"], False)
        if kind == BOUNDED and (tail_inf or head_inf):
            violations.append(f"edge {e['id']!r}: bounded edge touches a vertex at infinity")
        if kind == RIGHT and (not head_inf or tail_inf):
            violations.append(
                f"edge {e['id']!r}: right half-line needs a finite tail and a head at infinity")
        if kind == LEFT and (not tail_inf or head_inf):
            violations.append(
                f"edge {e['id']!r}: left half-line needs a tail at infinity and a finite head")
    for v, is_inf in inf.items():
        if is_inf and degree[v] != 1:
            violations.append(f"vertex at infinity {v!r} has degree {degree[v]} (must be 1)")
        if degree[v] == 0:
            violations.append(f"vertex {v!r} is isolated")
    if not violations and doc["edges"]:
        index = {v: i for i, v in enumerate(inf)}
        rows = [index[e["tail"]] for e in doc["edges"]]
        cols = [index[e["head"]] for e in doc["edges"]]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(index),) * 2)
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            violations.append(f"graph is disconnected ({ncomp} components)")
    d = int(doc["fiber_dim"])
    for vid_key, raw in doc.get("conditions", {}).items():
        vid = _lookup_vertex(vid_key, inf)
        if vid is None:
            violations.append(f"condition given for unknown vertex {vid_key!r}")
            continue
        if inf[vid]:
            violations.append(f"condition given for vertex at infinity {vid!r}")
            continue
        _parse_condition(raw, violations, vid, degree[vid] * d)
    return violations


def _lookup_vertex(key, inf: dict):
    if key in inf:
        return key
    for v in inf:
        if str(v) == str(key):
            return v
    return None


def build_graph(doc: dict) -> MetricGraph:
    """Validate a graph description document and build the graph.

    Raises :class:`GraphValidationError` listing every violated invariant.
    Vertices without a condition default to Kirchhoff.
    """
    violations = validate_document(doc)
    if violations:
        raise GraphValidationError(violations)
    d = int(doc["fiber_dim"])
    vertices = tuple(Vertex(v["id"], bool(v.get("at_infinity", False)))
                     for v in doc["vertices"])
    edges = []
    for e in doc["edges"]:
        kind, a, b = _parse_interval(e["interval"])
        edges.append(Edge(e["id"], e["tail"], e["head"], kind, a, b))
    edges.sort(key=lambda e: _id_key(e.id))
    inf = {v.id: v.at_infinity for v in vertices}
    conditions: dict = {}
    for v in vertices:
        if not v.at_infinity:
            conditions[v.id] = VertexCondition("kirchhoff")
    raw_conds = doc.get("conditions", {})
    for key, raw in raw_conds.items():
        vid = _lookup_vertex(key, inf)
        deg = sum((e.tail == vid) + (e.head == vid) for e in edges)
        conditions[vid] = _parse_condition(raw, [], vid, deg * d)
    coeffs = {}
    for key, raw in doc.get("coefficients", {}).items():
        match = [e.id for e in edges if str(e.id) == str(key)]
        if not match:
            raise GraphValidationError([f"coefficients given for unknown edge {key!r}"])
        coeffs[match[0]] = raw
    return MetricGraph(vertices, tuple(edges), d, conditions, coeffs)


def load_graph(path) -> MetricGraph:
    with open(path) as fh:
        return build_graph(json.load(fh))


def with_conditions(g: MetricGraph, conditions: Mapping[Any, VertexCondition | str]
                    ) -> MetricGraph:
    """Copy of ``g`` with some vertex conditions replaced."""
    new = dict(g.conditions)
    for k, c in conditions.items():
        new[k] = VertexCondition(c) if isinstance(c, str) else c
    return MetricGraph(g.vertices, g.edges, g.fiber_dim, new, g.coefficients, g.offset)


def with_coefficients(g: MetricGraph, coefficients: Mapping[Any, dict]) -> MetricGraph:
    return MetricGraph(g.vertices, g.edges, g.fiber_dim, g.conditions, dict(coefficients),
                       g.offset)


# ---------------------------------------------------------------------------
# Canonical graphs
# ---------------------------------------------------------------------------


def _doc(vertices, edges, d, conditions, coefficients=None) -> dict:
    doc = {"fiber_dim": d, "vertices": vertices, "edges": edges, "conditions": conditions}
    if coefficients:
        doc["coefficients"] = coefficients
    return doc


def segment(length: float = 1.0, d: int = 1, a: float = 0.0,
            left: str = "dirichlet", right: str = "dirichlet") -> MetricGraph:
    """A single bounded edge ``[a, a + length]`` from vertex ``L`` to ``R``."""
    return build_graph(_doc(
        [{"id": "L", "at_infinity": False}, {"id": "R", "at_infinity": False}],
        [{"id": 0, "tail": "L", "head": "R",
          "interval": {"kind": BOUNDED, "a": a, "b": a + length}}],
        d, {"L": left, "R": right}))


def star_graph(m: int, lengths: Sequence[float] | None = None, d: int = 1) -> MetricGraph:
    """Star with centre ``c`` and leaves ``l1..lm``, edges oriented outward.

    Leaves carry Dirichlet conditions and the centre Kirchhoff.
    """
    if m < 1:
        raise ValueError("a star needs at least one leaf")
    lengths = [1.0] * m if lengths is None else list(lengths)
    if len(lengths) != m:
        raise ValueError("need one length per leaf")
    verts = [{"id": "c", "at_infinity": False}]
    verts += [{"id": f"l{j + 1}", "at_infinity": False} for j in range(m)]
    edges = [{"id": j, "tail": "c", "head": f"l{j + 1}",
              "interval": {"kind": BOUNDED, "a": 0.0, "b": float(lengths[j])}}
             for j in range(m)]
    conds = {"c": "kirchhoff"}
    conds.update({f"l{j + 1}": "dirichlet" for j in range(m)})
    return build_graph(_doc(verts, edges, d, conds))


def two_star(m_a: int, m_b: int, lengths: Sequence[float] | None = None,
             d: int = 1) -> MetricGraph:
    """Two stars with centres ``A`` and ``B`` joined by the edge ``A -> B``.

    Edge ids: ``0..m_a-1`` are the leaves of ``A``, ``m_a`` is the connecting
    edge and ``m_a+1..m_a+m_b`` are the leaves of ``B``.  All leaf edges point
    away from their centre.  ``lengths`` follows the edge ids.
    """
    if m_a < 1 or m_b < 1:
        raise ValueError("each star needs at least one leaf")
    m = m_a + m_b + 1
    lengths = [1.0] * m if lengths is None else list(lengths)
    if len(lengths) != m:
        raise ValueError(f"need {m} lengths")
    verts = [{"id": "A", "at_infinity": False}, {"id": "B", "at_infinity": False}]
    verts += [{"id": f"a{j + 1}", "at_infinity": False} for j in range(m_a)]
    verts += [{"id": f"b{j + 1}", "at_infinity": False} for j in range(m_b)]
    edges = [{"id": j, "tail": "A", "head": f"a{j + 1}",
              "interval": {"kind": BOUNDED, "a": 0.0, "b": float(lengths[j])}}
             for j in range(m_a)]
    edges.append({"id": m_a, "tail": "A", "head": "B",
                  "interval": {"kind": BOUNDED, "a": 0.0, "b": float(lengths[m_a])}})
    edges += [{"id": m_a + 1 + j, "tail": "B", "head": f"b{j + 1}",
               "interval": {"kind": BOUNDED, "a": 0.0, "b": float(lengths[m_a + 1 + j])}}
              for j in range(m_b)]
    conds = {"A": "kirchhoff", "B": "kirchhoff"}
    conds.update({f"a{j + 1}": "dirichlet" for j in range(m_a)})
    conds.update({f"b{j + 1}": "dirichlet" for j in range(m_b)})
    return build_graph(_doc(verts, edges, d, conds))


def leaf_with_half_line(d: int = 1, length: float = 1.0) -> MetricGraph:
    """Bounded edge ``[0, length]`` from ``v0`` to ``v1`` plus ``[length, oo)`` from ``v1``.

    ``v0`` is Dirichlet and ``v1`` Kirchhoff, so the boundary condition is
    Dirichlet at the free end and continuity plus flux balance at the junction.
    """
    return build_graph(_doc(
        [{"id": "v0", "at_infinity": False}, {"id": "v1", "at_infinity": False},
         {"id": "inf", "at_infinity": True}],
        [{"id": 0, "tail": "v0", "head": "v1",
          "interval": {"kind": BOUNDED, "a": 0.0, "b": length}},
         {"id": 1, "tail": "v1", "head": "inf", "interval": {"kind": RIGHT, "a": length}}],
        d, {"v0": "dirichlet", "v1": "kirchhoff"}))


# ---------------------------------------------------------------------------
# Boundary space, traces and Lagrangians
# ---------------------------------------------------------------------------


def boundary_space(g: MetricGraph) -> SymplecticForm:
    """``(T*R^{N_a}, -Omega) + (T*R^{N_b}, Omega)``; empty blocks are omitted."""
    blocks = []
    if g.n_a:
        blocks.append((g.n_a, -1))
    if g.n_b:
        blocks.append((g.n_b, 1))
    return make_form(blocks)


def boundary_index(g: MetricGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index arrays ``(p_rows, q_rows, signs)`` ordered like the configuration vector.

    ``p_rows[k]`` and ``q_rows[k]`` locate the momentum and configuration of
    configuration coordinate ``k`` (a-block first); ``signs[k]`` is ``-1`` on
    the a-block so that ``p~ = signs * p``.
    """
    na, nb = g.n_a, g.n_b
    p_rows = np.concatenate([np.arange(na), 2 * na + np.arange(nb)])
    q_rows = np.concatenate([na + np.arange(na), 2 * na + nb + np.arange(nb)])
    signs = np.concatenate([-np.ones(na), np.ones(nb)])
    return p_rows, q_rows, signs


@dataclass(frozen=True)
class BoundaryTrace:
    """Values and quasi-Wronskians at the finite endpoints."""

    p_a: np.ndarray
    q_a: np.ndarray
    p_b: np.ndarray
    q_b: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.p_a, self.q_a, self.p_b, self.q_b])


EdgeFunction = Callable[[float], tuple[np.ndarray, np.ndarray]]


def trace(g: MetricGraph, f: Mapping[Any, EdgeFunction], coeffs) -> BoundaryTrace:
    """Boundary trace of an edgewise function.

    ``f[edge_id](t)`` returns ``(x(t), x'(t))``.  ``coeffs`` is an object with
    ``P(edge_id, t)`` and ``Q(edge_id, t)`` methods (see
    :class:`graphindex.hamiltonian.SLCoefficients`).
    """
    d = g.fiber_dim
    blocks: dict[str, list[np.ndarray]] = {"pa": [], "qa": [], "pb": [], "qb": []}
    for e in g.edges:
        if e.id not in f:
            raise KeyError(f"missing samples for edge {e.id!r}")
        for end, t in (("a", e.a), ("b", e.b)):
            if not math.isfinite(t):
                continue
            x, dx = (np.atleast_1d(np.asarray(v, dtype=float)) for v in f[e.id](t))
            if x.shape != (d,) or dx.shape != (d,):
                raise ValueError(f"edge {e.id!r}: samples must have shape ({d},)")
            p = coeffs.P(e.id, t) @ dx + coeffs.Q(e.id, t) @ x
            blocks["p" + end].append(p)
            blocks["q" + end].append(x)
    cat = {k: np.concatenate(v) if v else np.zeros(0) for k, v in blocks.items()}
    return BoundaryTrace(cat["pa"], cat["qa"], cat["pb"], cat["qb"])


def _local_subspace(cond: VertexCondition, k: int, d: int) -> np.ndarray:
    """Basis of ``W`` in the local configuration space of dimension ``k*d``."""
    n = k * d
    if cond.kind == "dirichlet":
        return np.zeros((n, 0))
    if cond.kind == "neumann":
        return np.eye(n)
    if cond.kind == "kirchhoff":
        return np.kron(np.ones((k, 1)), np.eye(d)) / math.sqrt(k)
    if cond.kind == "conormal":
        return orthonormal_basis(np.asarray(cond.basis, dtype=float))
    raise ValueError(f"unknown vertex condition {cond.kind!r}")


def configuration_subspace(g: MetricGraph, conditions: Mapping | None = None) -> np.ndarray:
    """Global ``W`` inside ``R^{N_a + N_b}`` assembled vertex by vertex."""
    conditions = g.conditions if conditions is None else conditions
    cols = []
    for vid in g.finite_vertices:
        slots = g.vertex_slots(vid)
        if not slots:
            continue
        rows = np.concatenate([g.config_rows(s) for s in slots])
        local = _local_subspace(conditions[vid], len(slots), g.fiber_dim)
        block = np.zeros((g.config_dim, local.shape[1]))
        block[rows] = local
        cols.append(block)
    return np.hstack(cols) if cols else np.zeros((g.config_dim, 0))


def conormal_frame(g: MetricGraph, w: np.ndarray) -> LagrangianFrame:
    """Lagrangian ``{q in W, p~ in W^perp}`` in ``boundary_space(g)``."""
    space = boundary_space(g)
    p_rows, q_rows, signs = boundary_index(g)
    n = g.config_dim
    wb = orthonormal_basis(np.asarray(w, dtype=float).reshape(n, -1))
    wp = orthogonal_complement(wb)
    basis = np.zeros((space.dim, n))
    k = wb.shape[1]
    basis[q_rows, :k] = wb
    basis[p_rows, k:] = signs[:, None] * wp
    return LagrangianFrame(space, basis)


def conditions_to_lagrangian(g: MetricGraph, conditions: Mapping | None = None
                             ) -> LagrangianFrame:
    """Boundary Lagrangian of the vertex conditions (composed blockwise)."""
    frame = conormal_frame(g, configuration_subspace(g, conditions))
    frame.assert_lagrangian()
    return frame


def dirichlet_lagrangian(g: MetricGraph) -> LagrangianFrame:
    return conormal_frame(g, np.zeros((g.config_dim, 0)))


def neumann_lagrangian(g: MetricGraph) -> LagrangianFrame:
    return conormal_frame(g, np.eye(g.config_dim))


def split_lagrangian(g: MetricGraph, frame: LagrangianFrame
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Split a boundary Lagrangian into its configuration space and symmetric map.

    Returns ``(U, S)`` with ``U`` an orthonormal basis of ``W = pi_q(Lambda)`` and
    ``S`` symmetric on ``W`` (in ``U`` coordinates) such that
    ``Lambda = {(p~, U r) : U^T p~ = S r}`` in signed momenta.
    """
    p_rows, q_rows, signs = boundary_index(g)
    pt = signs[:, None] * frame.basis[p_rows]
    q = frame.basis[q_rows]
    u = orthonormal_basis(q)
    # coefficients c with q-part in span(U): choose c spanning the preimage
    uq, sq, vqt = np.linalg.svd(q, full_matrices=True)
    k = u.shape[1]
    vq = vqt.T
    # columns vq[:, :k] map onto W, vq[:, k:] onto 0
    r_of_c = u.T @ q @ vq[:, :k]                    # k x k invertible
    p_proj = u.T @ pt @ vq[:, :k]                   # k x k
    s = p_proj @ np.linalg.inv(r_of_c) if k else np.zeros((0, 0))
    return u, 0.5 * (s + s.T)


def document_schema_path() -> str:
    return str(resources.files("graphindex").joinpath("data/graph.schema.json"))
