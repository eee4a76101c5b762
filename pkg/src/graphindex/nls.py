"""Standing and traveling waves of the focusing NLS on metric graphs.

Conventions:

* energy ``E(u) = 1/2 int |u'|^2 - (1/p) int |u|^p`` and mass ``int |u|^2``;
* a standing wave ``e^{i w t} Phi`` has ``Phi'' + |Phi|^{p-2} Phi = w Phi``
  (``w > 0`` for localized states), so ``w`` is the Lagrange multiplier of the
  mass-constrained minimization;
* on the line the ground state is ``C_p sech(c_p x)^{2/(p-2)}`` with
  ``C_p = (w p / 2)^{1/(p-2)}`` and ``c_p = (p-2) sqrt(w) / 2``.

Fields are real and live on a P1 finite element mesh of the graph; half-lines
are truncated at a horizon where the exact decaying tail ``u(T) e^{-k (x-T)}``,
``k = sqrt(w)``, is attached.  The tail adds ``k u(T)^2 / 4`` to the kinetic
energy and ``u(T)^2 / (2k)`` to the mass, which at ``k = sqrt(w)`` is the
exact Robin condition ``u' = -k u`` for the linearized far field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.optimize import brentq
from scipy.special import gamma

from .graph import BOUNDED, LEFT, RIGHT, MetricGraph, build_graph
from .hamiltonian import Constant, EdgeCoefficients, SLCoefficients, Table
from .spectral import EPS_KERNEL, assemble, morse_index
from .graph import conditions_to_lagrangian

DEFAULT_TRUNCATION = 20.0
NODES_PER_UNIT = 50
STALL_RESIDUAL = 1e-7
STALL_STEPS = 200
_GX, _GW = np.polynomial.legendre.leggauss(4)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW


class NLSError(RuntimeError):
    """Invalid NLS parameters or a stalled flow."""


def _check_p(p: float) -> float:
    p = float(p)
    if not 2.0 < p < 6.0:
        raise NLSError(f"exponent p={p} outside the subcritical range (2, 6)")
    return p


# ---------------------------------------------------------------------------
# The line soliton
# ---------------------------------------------------------------------------


def _sech_power_integral(s: float) -> float:
    """``int_R sech(y)^s dy = sqrt(pi) Gamma(s/2) / Gamma((s+1)/2)``."""
    return math.sqrt(math.pi) * gamma(0.5 * s) / gamma(0.5 * (s + 1.0))


@dataclass(frozen=True)
class SolitonProfile:
    """Line ground state ``C_p sech(c_p x)^{alpha / beta_nls}`` of mass ``mu``."""

    p: float
    mu: float
    omega: float
    C_p: float
    c_p: float
    truncation: float
    x: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def alpha(self) -> float:
        return 2.0 / (6.0 - self.p)

    @property
    def beta_nls(self) -> float:
        return (self.p - 2.0) / (6.0 - self.p)

    @property
    def exponent(self) -> float:
        return self.alpha / self.beta_nls

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.C_p / np.cosh(self.c_p * x) ** self.exponent

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -self.exponent * self.c_p * np.tanh(self.c_p * x) * self(x)

    def second_derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        th = np.tanh(self.c_p * x)
        k = self.exponent
        return self.c_p ** 2 * self(x) * (k * k * th * th - k * (1.0 - th * th))

    @property
    def tail_mass(self) -> float:
        """Mass outside ``[-T, T]``."""
        y = self.c_p * self.truncation
        s = 2.0 * self.exponent
        # int_y^oo sech^s <= 2^s e^{-s y} / s, exact enough for reporting
        from scipy.integrate import quad
        tail, _ = quad(lambda t: np.cosh(t) ** (-s), y, np.inf)
        return 2.0 * self.C_p ** 2 * tail / self.c_p

    def residual(self, x=None) -> float:
        """Max of ``|phi'' + phi^{p-1} - w phi|`` from the closed-form derivatives."""
        x = self.x if x is None else np.asarray(x, dtype=float)
        phi = self(x)
        return float(np.abs(self.second_derivative(x) + phi ** (self.p - 1.0)
                            - self.omega * phi).max())

    @property
    def energy(self) -> float:
        """Energy on the whole line, by the closed-form sech integrals."""
        k = self.exponent
        # int phi'^2 = C^2 c k^2 int sech^{2k} tanh^2 ; int phi^p = C^p / c int sech^{pk}
        i2k = _sech_power_integral(2 * k)
        i2k2 = _sech_power_integral(2 * k + 2)
        kinetic = self.C_p ** 2 * self.c_p * k * k * (i2k - i2k2)
        potential = self.C_p ** self.p / self.c_p * _sech_power_integral(self.p * k)
        return 0.5 * kinetic - potential / self.p


def soliton_profile(p: float = 4.0, mu: float = 1.0, truncation: float = DEFAULT_TRUNCATION,
                    n: int = 4001) -> SolitonProfile:
    """Positive line ground state of mass ``mu`` on the whole line.

    ``w`` is solved with ``brentq`` from the closed-form mass; samples are taken
    on ``[-T, T]``.
    """
    p = _check_p(p)
    if mu <= 0:
        raise NLSError("mass must be positive")
    k = 2.0 / (p - 2.0)
    i2k = _sech_power_integral(2 * k)

    def mass(w: float) -> float:
        amp = (w * p / 2.0) ** (1.0 / (p - 2.0))
        rate = (p - 2.0) * math.sqrt(w) / 2.0
        return amp * amp * i2k / rate

    hi = 1.0
    while mass(hi) < mu:
        hi *= 4.0
    lo = hi
    while mass(lo) > mu:
        lo /= 4.0
    w = brentq(lambda s: mass(s) - mu, lo, hi, xtol=1e-16, rtol=1e-15)
    x = np.linspace(-truncation, truncation, n)
    amp = (w * p / 2.0) ** (1.0 / (p - 2.0))
    rate = (p - 2.0) * math.sqrt(w) / 2.0
    prof = SolitonProfile(p, float(mu), w, amp, rate, float(truncation), x, x)
    object.__setattr__(prof, "values", prof(x))
    return prof


def traveling_wave_residual(x: np.ndarray, phi: np.ndarray, omega: float, k: float = 0.0,
                            g: Callable[[np.ndarray], np.ndarray] | None = None,
                            p: float = 4.0) -> float:
    """Max-norm residual of ``phi'' + g(phi^2) phi + (omega - k^2) phi = 0``.

    ``x`` must be uniform; ``phi''`` is taken by fourth-order central
    differences on interior points.  The default ``g(s) = s^{(p-2)/2}``.
    With this sign convention the line soliton has ``omega = -w``.
    """
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    h = x[1] - x[0]
    if np.abs(np.diff(x) - h).max() > 1e-9 * max(1.0, abs(h)):
        raise ValueError("traveling_wave_residual needs a uniform grid")
    if g is None:
        q = (p - 2.0) / 2.0

        def g(s):
            return np.abs(s) ** q
    d2 = (-phi[:-4] + 16 * phi[1:-3] - 30 * phi[2:-2] + 16 * phi[3:-1] - phi[4:]) / (12 * h * h)
    mid = phi[2:-2]
    return float(np.abs(d2 + g(mid * mid) * mid + (omega - k * k) * mid).max())


def far_field_rate(omega: float, k: float, c: float) -> float:
    """Decay rate ``r`` of ``e^{-r x}`` solving ``phi'' + (c + omega - k^2) phi = 0``.

    Here ``c = g(0)`` is the linear part of the nonlinearity; decay needs
    ``k^2 - c - omega > 0`` and ``r = sqrt(k^2 - c - omega)``.
    """
    disc = k * k - c - omega
    if disc <= 0:
        raise NLSError("no decaying far field: k^2 - g(0) - omega must be positive")
    return math.sqrt(disc)


def velocity_mismatch_residual(profile: SolitonProfile, k1: float, k2: float,
                               x: np.ndarray | None = None) -> float:
    """Residual forced on edge 1 when continuity ties ``phi_1(x) = phi_2(kappa x)``.

    ``phi_2`` is the soliton solving the edge-2 equation
    ``phi'' + phi^{p-1} + (omega - k2^2) phi = 0`` (so ``omega = k2^2 - w``);
    ``phi_1(x) = phi_2(kappa x)`` with ``kappa = k2 / k1`` is inserted into the
    edge-1 equation.  The result vanishes exactly when ``k1 = k2``.
    """
    if k1 <= 0 or k2 <= 0:
        raise ValueError("velocities must be positive")
    x = np.linspace(0.0, profile.truncation, 2001) if x is None else np.asarray(x, float)
    kappa = k2 / k1
    omega = k2 * k2 - profile.omega
    phi1 = profile(kappa * x)
    d2 = kappa * kappa * profile.second_derivative(kappa * x)
    res = d2 + np.abs(phi1) ** (profile.p - 2.0) * phi1 + (omega - k1 * k1) * phi1
    return float(np.abs(res).max())


# ---------------------------------------------------------------------------
# P1 meshes on graphs
# ---------------------------------------------------------------------------


def line_graph() -> MetricGraph:
    """The real line as two half-lines joined at ``o`` (Kirchhoff)."""
    return build_graph({
        "fiber_dim": 1,
        "vertices": [{"id": "-inf", "at_infinity": True}, {"id": "o", "at_infinity": False},
                     {"id": "+inf", "at_infinity": True}],
        "edges": [{"id": 0, "tail": "-inf", "head": "o",
                   "interval": {"kind": LEFT, "b": 0.0}},
                  {"id": 1, "tail": "o", "head": "+inf",
                   "interval": {"kind": RIGHT, "a": 0.0}}],
        "conditions": {"o": "kirchhoff"},
    })


@dataclass
class GraphMesh:
    """Continuous P1 elements on a scalar graph with half-lines truncated.

    ``edge_nodes[e]`` lists global node numbers along edge ``e`` in the
    direction of its parameter and ``edge_t[e]`` their parameters.  Vertex
    nodes are shared, which imposes continuity; Kirchhoff flux balance is the
    natural condition.  Dirichlet vertices are dropped from ``free``.
    ``tails`` holds the nodes at truncated far ends.
    """

    graph: MetricGraph
    truncation: float
    n_nodes: int
    edge_nodes: dict
    edge_t: dict
    free: np.ndarray
    tails: np.ndarray
    K: sp.csr_matrix = field(repr=False)
    M: sp.csr_matrix = field(repr=False)
    elements: np.ndarray = field(repr=False)  # (n_el, 2) global node pairs
    lengths: np.ndarray = field(repr=False)

    def restrict(self, u: np.ndarray) -> np.ndarray:
        return u[self.free]

    def extend(self, v: np.ndarray) -> np.ndarray:
        u = np.zeros(self.n_nodes, dtype=np.result_type(v, float))
        u[self.free] = v
        return u

    def edge_values(self, u: np.ndarray) -> dict:
        return {e: (self.edge_t[e], u[idx]) for e, idx in self.edge_nodes.items()}


def graph_mesh(g: MetricGraph, truncation: float = DEFAULT_TRUNCATION,
               nodes_per_unit: int = NODES_PER_UNIT) -> GraphMesh:
    if g.fiber_dim != 1:
        raise NLSError("the NLS module works with scalar fields (fiber_dim = 1)")
    for vid, cond in g.conditions.items():
        if cond.kind not in ("kirchhoff", "dirichlet") and not (
                cond.kind == "neumann" and g.degree(vid) == 1):
            raise NLSError(f"vertex {vid!r}: only Kirchhoff and Dirichlet conditions "
                           "are supported for NLS fields")
    vnode = {}
    for v in g.finite_vertices:
        vnode[v] = len(vnode)
    count = len(vnode)
    edge_nodes, edge_t, tails, elements, lengths = {}, {}, [], [], []
    for e in g.edges:
        a, b = e.a, e.b
        if e.kind == RIGHT:
            b = a + truncation
        elif e.kind == LEFT:
            a = b - truncation
        n_el = max(2, int(math.ceil((b - a) * nodes_per_unit)))
        t = np.linspace(a, b, n_el + 1)
        inner = np.arange(count, count + n_el - 1)
        count += n_el - 1
        start = vnode[e.tail] if e.kind != LEFT else None
        end = vnode[e.head] if e.kind != RIGHT else None
        if start is None:
            start = count
            count += 1
            tails.append(start)
        if end is None:
            end = count
            count += 1
            tails.append(end)
        nodes = np.concatenate([[start], inner, [end]])
        edge_nodes[e.id], edge_t[e.id] = nodes, t
        elements.append(np.stack([nodes[:-1], nodes[1:]], axis=1))
        lengths.append(np.diff(t))
    elements = np.vstack(elements)
    lengths = np.concatenate(lengths)
    rows = np.repeat(elements, 2, axis=1).ravel()
    cols = np.tile(elements, (1, 2)).ravel()
    kloc = np.array([1.0, -1.0, -1.0, 1.0])
    mloc = np.array([2.0, 1.0, 1.0, 2.0]) / 6.0
    K = sp.coo_matrix(((kloc[None, :] / lengths[:, None]).ravel(), (rows, cols)),
                      shape=(count, count)).tocsr()
    M = sp.coo_matrix(((mloc[None, :] * lengths[:, None]).ravel(), (rows, cols)),
                      shape=(count, count)).tocsr()
    fixed = {vnode[v] for v, c in g.conditions.items()
             if c.kind == "dirichlet" and v in vnode}
    free = np.array([i for i in range(count) if i not in fixed], dtype=int)
    return GraphMesh(g, float(truncation), count, edge_nodes, edge_t, free,
                     np.array(tails, dtype=int), K, M, elements, lengths)


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------


@dataclass
class GraphField:
    """Nodal values of a (real or complex) field on a :class:`GraphMesh`."""

    mesh: GraphMesh
    values: np.ndarray

    def on_edge(self, edge) -> tuple[np.ndarray, np.ndarray]:
        return self.mesh.edge_t[edge], self.values[self.mesh.edge_nodes[edge]]


def _power_integral(mesh: GraphMesh, u: np.ndarray, p: float) -> float:
    ua = np.abs(u[mesh.elements])
    vals = ua[:, :1] * (1.0 - _GX) + ua[:, 1:] * _GX
    return float(np.sum(mesh.lengths[:, None] * _GW * vals ** p))


def _kinetic_sum(mesh: GraphMesh, u: np.ndarray) -> float:
    """``int |u'|^2`` as a sum of squares (no cancellation, unlike ``u K u``)."""
    du = np.abs(u[mesh.elements[:, 1]] - u[mesh.elements[:, 0]])
    return float(np.sum(du * du / mesh.lengths))


def _mass_sum(mesh: GraphMesh, u: np.ndarray) -> float:
    """``int |u|^2`` for P1 ``u`` as ``h/3 (|a|^2 + Re(a b*) + |b|^2)`` per element."""
    a, b = u[mesh.elements[:, 0]], u[mesh.elements[:, 1]]
    return float(np.sum(mesh.lengths / 3.0 * (np.abs(a) ** 2 + np.real(a * np.conj(b))
                                              + np.abs(b) ** 2)))


def _power_gradient(mesh: GraphMesh, u: np.ndarray, p: float) -> np.ndarray:
    """``d/du (1/p) int |u|^p`` for real nodal ``u``."""
    ue = u[mesh.elements]
    vals = ue[:, :1] * (1.0 - _GX) + ue[:, 1:] * _GX
    f = np.abs(vals) ** (p - 2.0) * vals * _GW * mesh.lengths[:, None]
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.elements[:, 0], f @ (1.0 - _GX))
    np.add.at(out, mesh.elements[:, 1], f @ _GX)
    return out


def _power_hessian(mesh: GraphMesh, u: np.ndarray, p: float) -> sp.csr_matrix:
    """``(p-1) int |u|^{p-2} phi_i phi_j``."""
    ue = u[mesh.elements]
    vals = ue[:, :1] * (1.0 - _GX) + ue[:, 1:] * _GX
    w = (p - 1.0) * np.abs(vals) ** (p - 2.0) * _GW * mesh.lengths[:, None]
    shp = np.stack([1.0 - _GX, _GX])
    loc = np.einsum("eq,iq,jq->eij", w, shp, shp).reshape(-1, 4)
    rows = np.repeat(mesh.elements, 2, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 2)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)),
                         shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()


def mass(u: GraphField, tail_rate: float | None = None) -> float:
    """``int |u|^2`` over the truncated graph, plus exact tails when ``tail_rate`` is set."""
    v = u.values
    out = _mass_sum(u.mesh, v)
    if tail_rate is not None and u.mesh.tails.size:
        out += float(np.sum(np.abs(v[u.mesh.tails]) ** 2)) / (2.0 * tail_rate)
    return out


def energy(u: GraphField, p: float = 4.0, tail_rate: float | None = None) -> float:
    """``1/2 int |u'|^2 - (1/p) int |u|^p`` (with exact linear tails if requested)."""
    p = _check_p(p)
    v = u.values
    kin = _kinetic_sum(u.mesh, v)
    if tail_rate is not None and u.mesh.tails.size:
        kin += 0.5 * tail_rate * float(np.sum(np.abs(v[u.mesh.tails]) ** 2))
    return 0.5 * kin - _power_integral(u.mesh, v, p) / p


# ---------------------------------------------------------------------------
# Normalized gradient flow
# ---------------------------------------------------------------------------


@dataclass
class FlowResult:
    field: GraphField
    omega: float
    energies: list[float]
    masses: list[float]
    steps: list[float]
    residual: float
    converged: bool
    tail_rate: float | None

    def trace_rows(self) -> list[tuple[int, float, float, float]]:
        return [(i, e, m, s) for i, (e, m, s) in
                enumerate(zip(self.energies, self.masses, self.steps))]


def initial_field(mesh: GraphMesh, mu: float, width: float = 4.0) -> GraphField:
    """Positive bump: ``1`` on bounded edges, Gaussian decay along half-lines.

    Values at Dirichlet vertices are zero; the result has mass ``mu``.
    """
    g = mesh.graph
    u = np.zeros(mesh.n_nodes)
    for e in g.edges:
        t = mesh.edge_t[e.id]
        nodes = mesh.edge_nodes[e.id]
        if e.kind == BOUNDED:
            u[nodes] = 1.0
        else:
            s = t - e.a if e.kind == RIGHT else e.b - t
            u[nodes] = np.exp(-(s / width) ** 2)
    u = mesh.extend(mesh.restrict(u))
    fld = GraphField(mesh, u)
    fld.values *= math.sqrt(mu / mass(fld))
    return fld


def normalized_gradient_flow(mesh: GraphMesh, mu: float = 1.0, p: float = 4.0,
                             u0: GraphField | None = None, max_steps: int = 5000,
                             tol: float = 1e-8, exact_tails: bool = True,
                             armijo: float = 1e-4) -> FlowResult:
    """Mass-constrained descent of the energy with an ``H^1`` preconditioner.

    Each step solves ``(K + s M) d = -(grad E - w M u)`` on the free nodes
    (``s`` is the multiplier of the previous restart when positive, else 1), tries
    ``u + tau d`` renormalized to mass ``mu`` and halves ``tau`` until the
    Armijo condition holds.  With ``exact_tails`` the decay rate at truncated
    ends is updated to ``sqrt(w)`` and the flow restarts from the current state
    until the rate settles; the energy trace restarts with it.
    """
    p = _check_p(p)
    u = (initial_field(mesh, mu) if u0 is None else GraphField(mesh, u0.values.copy())).values
    free = mesh.free
    has_tails = exact_tails and mesh.tails.size > 0
    rate = 1.0 if has_tails else None
    k_ff = mesh.K[free][:, free]
    m_ff = mesh.M[free][:, free]
    tail_local = np.searchsorted(free, mesh.tails) if has_tails else np.zeros(0, int)
    energies, masses, steps = [], [], []
    omega = 0.0
    residual = math.inf
    converged = False

    for _outer in range(40):
        # operators for the current tail rate
        k_eff, m_eff = k_ff.tolil(), m_ff.tolil()
        if has_tails:
            for i in tail_local:
                k_eff[i, i] += 0.5 * rate
                m_eff[i, i] += 1.0 / (2.0 * rate)
        k_eff, m_eff = k_eff.tocsr(), m_eff.tocsr()
        shift = omega if omega > 1e-3 else 1.0
        solve = spl.factorized((k_eff + shift * m_eff).tocsc())

        def e_of(v):
            fld = GraphField(mesh, mesh.extend(v))
            return energy(fld, p, rate)

        def m_of(v):
            return mass(GraphField(mesh, mesh.extend(v)), rate)

        v = mesh.restrict(u)
        v *= math.sqrt(mu / m_of(v))
        tau = 1.0
        e_cur = e_of(v)
        energies.append(e_cur)
        masses.append(m_of(v))
        steps.append(0.0)
        best, since_best = math.inf, 0
        for _ in range(max_steps):
            grad = k_eff @ v - mesh.restrict(_power_gradient(mesh, mesh.extend(v), p))
            mv = m_eff @ v
            omega = -float(v @ grad) / mu
            r = grad + omega * mv
            d = -solve(r)
            # project onto the tangent space of the mass sphere in the M-inner product
            pm = solve(mv)
            d -= (mv @ d) / (mv @ pm) * pm
            slope = float(r @ d)
            residual = math.sqrt(max(-slope, 0.0))
            if residual < tol:
                converged = True
                break
            if residual < 0.5 * best:
                best, since_best = residual, 0
            else:
                since_best += 1
                if since_best > STALL_STEPS and residual < STALL_RESIDUAL:
                    converged = True  # rounding floor of the residual
                    break
            tau = min(1.0, 2.0 * tau)
            while True:
                trial = v + tau * d
                trial *= math.sqrt(mu / m_of(trial))
                e_new = e_of(trial)
                if e_new <= e_cur + armijo * tau * slope:
                    break
                tau *= 0.5
                if tau < 1e-12:
                    break
            if tau < 1e-12:
                # the energy no longer resolves the step: rounding floor
                if residual < STALL_RESIDUAL:
                    converged = True
                    break
                raise NLSError("gradient flow step size collapsed")
            v, e_cur = trial, e_new
            energies.append(e_cur)
            masses.append(m_of(v))
            steps.append(tau)
        u = mesh.extend(v)
        if not has_tails:
            break
        if omega <= 0:
            raise NLSError("multiplier is not positive: no decaying tails on half-lines")
        new_rate = math.sqrt(omega)
        if abs(new_rate - rate) < 1e-10 * max(1.0, rate) and converged:
            break
        rate = new_rate
        converged = False
    fld = GraphField(mesh, u)
    return FlowResult(fld, omega, energies, masses, steps, residual, converged, rate)


# ---------------------------------------------------------------------------
# Linearization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StandingWaveIndex:
    unconstrained: int
    constrained: int
    mass_direction: float
    near_zero: tuple
    mesh_sizes: tuple


def _truncated_graph(g: MetricGraph, truncation: float) -> MetricGraph:
    """Half-lines cut at the horizon, the new far vertices Dirichlet."""
    doc = g.to_document()
    far = {v["id"] for v in doc["vertices"] if v.get("at_infinity")}
    for v in doc["vertices"]:
        v["at_infinity"] = False
    conds = dict(doc.get("conditions", {}))
    for e in doc["edges"]:
        iv = e["interval"]
        if iv["kind"] == RIGHT:
            a = iv.get("a", 0.0)
            e["interval"] = {"kind": BOUNDED, "a": a, "b": a + truncation}
        elif iv["kind"] == LEFT:
            b = iv.get("b", 0.0)
            e["interval"] = {"kind": BOUNDED, "a": b - truncation, "b": b}
    for v in far:
        conds[v] = "dirichlet"
    doc["conditions"] = conds
    doc.pop("coefficients", None)
    return build_graph(doc)


def linearized_coefficients(mesh: GraphMesh, phi: GraphField, omega: float,
                            p: float) -> SLCoefficients:
    """``-x'' + (w - (p-1)|Phi|^{p-2}) x`` edge by edge, the potential tabulated."""
    out = {}
    for e in mesh.graph.edges:
        t, vals = phi.on_edge(e.id)
        pot = omega - (p - 1.0) * np.abs(vals) ** (p - 2.0)
        out[e.id] = EdgeCoefficients(1, Constant(np.eye(1)), Constant(np.zeros((1, 1))),
                                     Table(t, pot[:, None, None]), Constant(np.zeros((1, 1))))
    return SLCoefficients(1, out)


def standing_wave_morse_index(phi: GraphField, omega: float, p: float = 4.0,
                              mesh_n: int = 64, eps: float = EPS_KERNEL
                              ) -> StandingWaveIndex:
    """Morse index of ``-d^2/dx^2 + w - (p-1)|Phi|^{p-2}`` with the graph's conditions.

    Half-lines are cut at the mesh horizon with Dirichlet ends: on the line the
    translation mode ``Phi'`` is an exact kernel, and the Dirichlet cut moves
    it to a small positive eigenvalue instead of leaving its sign to rounding.
    The constrained index subtracts one when ``<L^-1 Phi, Phi> < 0``, computed
    in the P1 discretization of the flow.
    """
    p = _check_p(p)
    mesh = phi.mesh
    g = mesh.graph
    gt = _truncated_graph(g, mesh.truncation) if not g.compact else g
    coeffs = linearized_coefficients(mesh, phi, omega, p)
    op = assemble(gt, coeffs, conditions_to_lagrangian(gt), mesh_n)
    mr = morse_index(op, eps)

    # mass direction in the P1 discretization (Dirichlet at the cut ends)
    keep = np.setdiff1d(mesh.free, mesh.tails)
    lin = (mesh.K + omega * mesh.M - _power_hessian(mesh, phi.values, p))[keep][:, keep]
    mphi = (mesh.M @ phi.values)[keep]
    direction = float(mphi @ spl.spsolve(lin.tocsc(), mphi))
    constrained = mr.index - (1 if direction < 0 else 0)
    return StandingWaveIndex(mr.index, constrained, direction, tuple(mr.near_zero),
                             tuple(mr.mesh_sizes))


def l2_error(phi: GraphField, profile: SolitonProfile, centre: float = 0.0) -> float:
    """``||phi - soliton||_{L^2}`` on the truncated graph, for line meshes.

    Edge parameters are read as line coordinates.
    """
    diff = np.zeros(phi.mesh.n_nodes)
    for e in phi.mesh.graph.edges:
        t, vals = phi.on_edge(e.id)
        diff[phi.mesh.edge_nodes[e.id]] = vals - profile(t - centre)
    return math.sqrt(max(float(diff @ (phi.mesh.M @ diff)), 0.0))


def nodal_residual(phi: GraphField, omega: float, p: float) -> float:
    """Max over edges of the discrete elliptic residual at interior nodes."""
    worst = 0.0
    for e in phi.mesh.graph.edges:
        t, vals = phi.on_edge(e.id)
        if len(t) >= 5:
            worst = max(worst, traveling_wave_residual(t, vals, -omega, 0.0, p=p))
    return worst


def profile_rows(phi: GraphField) -> list[tuple[Any, float, float]]:
    rows = []
    for e in phi.mesh.graph.edges:
        t, vals = phi.on_edge(e.id)
        rows.extend((e.id, float(a), float(b)) for a, b in zip(t, vals))
    return rows
