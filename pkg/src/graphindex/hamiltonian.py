"""Sturm-Liouville coefficients, Hamiltonian reduction and monodromy.

The edge operator ``-(P y' + Q y)' + Q^T y' + (R + C_s) y`` becomes the linear
Hamiltonian system ``z' = J B(t) z`` for ``z = (p, q) = (P y' + Q y, y)`` with

    B = [[P^-1, -P^-1 Q], [-Q^T P^-1, Q^T P^-1 Q - (R + C_s)]],

and ``J = [[0, -I], [I, 0]]``.  Monodromies are symplectic for the standard
form.  Two integrators are provided: an adaptive DOP853 reference and a
fixed-step sixth-order Magnus propagator that is exactly symplectic up to
rounding and cheap to evaluate along a sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .graph import MetricGraph, boundary_index, boundary_space
from .kernels import chain_products
from .maslov import LagrangianPath, MaslovError, detect_crossings
from .symplectic import (
    LagrangianFrame,
    dirichlet,
    graph_lagrangian,
    orthonormal_basis,
    standard_form,
    symplectic_matrix_standard,
    symplectic_residual,
)

TOL_SYMPL = 1e-9
MAGNUS_STEP = 0.25
DEFAULT_HORIZON = 20.0


class HamiltonianError(RuntimeError):
    """Integration or structural failure in the Hamiltonian flow."""


class NonHyperbolicError(HamiltonianError):
    """The limiting system at infinity has spectrum on the imaginary axis."""


# ---------------------------------------------------------------------------
# Matrix-valued coefficient functions
# ---------------------------------------------------------------------------


def _as_matrix(x, d: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(d)
    if a.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix, got shape {a.shape}")
    return a


class MatrixFunction:
    """A ``d x d`` matrix-valued function of ``t``; vectorized over ``t``."""

    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def limit(self, direction: int = 1) -> np.ndarray:
        """Value as ``t -> +oo`` (``direction=1``) or ``-oo``; raises if absent."""
        raise HamiltonianError(f"{self.kind} coefficients have no limit at infinity")

    def to_json(self):
        raise NotImplementedError


class Constant(MatrixFunction):
    kind = "constant"

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.value, t.shape + self.value.shape).copy()

    def limit(self, direction: int = 1) -> np.ndarray:
        return self.value

    def to_json(self):
        return self.value.tolist()


class Polynomial(MatrixFunction):
    """``sum_k M_k t^k``."""

    kind = "polynomial"

    def __init__(self, coefs: Sequence[np.ndarray]):
        self.coefs = np.asarray(coefs, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        powers = t[..., None] ** np.arange(len(self.coefs))
        return np.einsum("...k,kij->...ij", powers, self.coefs)

    def limit(self, direction: int = 1) -> np.ndarray:
        if len(self.coefs) > 1 and np.any(self.coefs[1:] != 0):
            raise HamiltonianError("non-constant polynomial coefficients are unbounded")
        return self.coefs[0]

    def to_json(self):
        return self.coefs.tolist()


class Table(MatrixFunction):
    """Piecewise-linear interpolation, constant outside the table."""

    kind = "table"

    def __init__(self, t: Sequence[float], values: Sequence[np.ndarray]):
        self.t = np.asarray(t, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("table abscissae must be strictly increasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = self.values.reshape(len(self.t), -1)
        out = np.stack([np.interp(t, self.t, flat[:, k]) for k in range(flat.shape[1])],
                       axis=-1)
        return out.reshape(t.shape + self.values.shape[1:])

    def limit(self, direction: int = 1) -> np.ndarray:
        return self.values[-1] if direction > 0 else self.values[0]

    def to_json(self):
        return {"t": self.t.tolist(), "values": self.values.tolist()}


class Fourier(MatrixFunction):
    """``M_0 + sum_k (A_k cos(k w t) + B_k sin(k w t))``."""

    kind = "fourier"

    def __init__(self, const: np.ndarray, cos: Sequence[np.ndarray] = (),
                 sin: Sequence[np.ndarray] = (), omega: float = 1.0):
        self.const = np.asarray(const, dtype=float)
        d = self.const.shape[0]
        self.cos = np.asarray(cos, dtype=float).reshape(-1, d, d)
        self.sin = np.asarray(sin, dtype=float).reshape(-1, d, d)
        self.omega = float(omega)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.broadcast_to(self.const, t.shape + self.const.shape).copy()
        for k, a in enumerate(self.cos, start=1):
            out += np.cos(k * self.omega * t)[..., None, None] * a
        for k, b in enumerate(self.sin, start=1):
            out += np.sin(k * self.omega * t)[..., None, None] * b
        return out

    def limit(self, direction: int = 1) -> np.ndarray:
        if np.any(self.cos != 0) or np.any(self.sin != 0):
            raise HamiltonianError("oscillating coefficients have no limit at infinity")
        return self.const

    def to_json(self):
        return {"const": self.const.tolist(), "cos": self.cos.tolist(),
                "sin": self.sin.tolist(), "omega": self.omega}


class Exponential(MatrixFunction):
    """``M_inf + A exp(-rate |t - t0|)``: asymptotically constant in both directions."""

    kind = "exponential"

    def __init__(self, limit: np.ndarray, amplitude: np.ndarray, rate: float, t0: float = 0.0):
        self.lim = np.asarray(limit, dtype=float)
        self.amplitude = np.asarray(amplitude, dtype=float)
        self.rate = float(rate)
        self.t0 = float(t0)
        if self.rate <= 0:
            raise ValueError("exponential rate must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w = np.exp(-self.rate * np.abs(t - self.t0))
        return self.lim + w[..., None, None] * self.amplitude

    def limit(self, direction: int = 1) -> np.ndarray:
        return self.lim

    def to_json(self):
        return {"limit": self.lim.tolist(), "amplitude": self.amplitude.tolist(),
                "rate": self.rate, "t0": self.t0}


def _parse_function(kind: str, raw, d: int, entry: dict) -> MatrixFunction:
    if kind == "constant":
        return Constant(_as_matrix(raw, d))
    if kind == "polynomial":
        # a list of coefficients, each a scalar or a d x d matrix
        items = list(raw) if isinstance(raw, list) else [raw]
        return Polynomial([_as_matrix(x, d) for x in items])
    if kind == "table":
        return Table(entry["t"], [_as_matrix(x, d) for x in raw])
    if kind == "fourier":
        if not isinstance(raw, dict):
            return Fourier(_as_matrix(raw, d))
        return Fourier(_as_matrix(raw.get("const", 0.0), d),
                       [_as_matrix(x, d) for x in raw.get("cos", [])],
                       [_as_matrix(x, d) for x in raw.get("sin", [])],
                       entry.get("omega", 1.0))
    if kind == "exponential":
        if not isinstance(raw, dict):
            return Constant(_as_matrix(raw, d))
        return Exponential(_as_matrix(raw.get("limit", 0.0), d),
                           _as_matrix(raw.get("amplitude", 0.0), d),
                           entry.get("rate", 1.0), entry.get("t0", 0.0))
    raise ValueError(f"unknown coefficient kind {kind!r}")


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeCoefficients:
    """``P, Q, R, C`` on one edge; ``C_s = s C``."""

    d: int
    P: MatrixFunction
    Q: MatrixFunction
    R: MatrixFunction
    C: MatrixFunction

    @classmethod
    def constant(cls, d: int, P=1.0, Q=0.0, R=0.0, C=0.0) -> "EdgeCoefficients":
        return cls(d, Constant(_as_matrix(P, d)), Constant(_as_matrix(Q, d)),
                   Constant(_as_matrix(R, d)), Constant(_as_matrix(C, d)))

    @classmethod
    def from_json(cls, entry: dict, d: int) -> "EdgeCoefficients":
        kind = entry.get("kind", "constant")
        defaults = {"P": 1.0, "Q": 0.0, "R": 0.0, "C": 0.0}
        funcs = {}
        for name, default in defaults.items():
            raw = entry.get(name, default)
            if name not in entry:
                funcs[name] = Constant(_as_matrix(default, d))
            else:
                funcs[name] = _parse_function(kind, raw, d, entry)
        return cls(d, **funcs)

    def to_json(self) -> dict:
        kinds = {f.kind for f in (self.P, self.Q, self.R, self.C)}
        if kinds != {"constant"}:
            raise ValueError("only constant coefficients serialize through to_json")
        return {"kind": "constant", "P": self.P.to_json(), "Q": self.Q.to_json(),
                "R": self.R.to_json(), "C": self.C.to_json()}

    def hamiltonian(self, t, s: float = 0.0) -> np.ndarray:
        """``B(t)`` for scalar or array ``t`` (shape ``t.shape + (2d, 2d)``)."""
        t = np.asarray(t, dtype=float)
        p, q = self.P(t), self.Q(t)
        r = self.R(t) + s * self.C(t)
        pinv = np.linalg.inv(p)
        qt = np.swapaxes(q, -1, -2)
        top = np.concatenate([pinv, -pinv @ q], axis=-1)
        bot = np.concatenate([-qt @ pinv, qt @ pinv @ q - r], axis=-1)
        b = np.concatenate([top, bot], axis=-2)
        return 0.5 * (b + np.swapaxes(b, -1, -2))

    def generator(self, t, s: float = 0.0) -> np.ndarray:
        """``J B(t)``."""
        return symplectic_matrix_standard(self.d) @ self.hamiltonian(t, s)

    def check(self, ts: np.ndarray, tol: float = 1e-10) -> list[str]:
        """Legendre and symmetry violations at sample points."""
        out = []
        p = self.P(ts)
        for name, f in (("P", self.P), ("R", self.R), ("C", self.C)):
            v = f(ts)
            asym = np.abs(v - np.swapaxes(v, -1, -2)).max()
            if asym > tol * max(1.0, np.abs(v).max()):
                out.append(f"{name} not symmetric (asymmetry {asym:.2e})")
        if np.linalg.eigvalsh(0.5 * (p + np.swapaxes(p, -1, -2))).min() <= 0:
            out.append("P is not positive definite (Legendre condition)")
        return out


@dataclass(frozen=True)
class SLCoefficients:
    """Edgewise coefficients of a Sturm-Liouville operator family."""

    d: int
    edges: Mapping[Any, EdgeCoefficients]

    def __getitem__(self, edge) -> EdgeCoefficients:
        return self.edges[edge]

    def P(self, edge, t):
        return self.edges[edge].P(t)

    def Q(self, edge, t):
        return self.edges[edge].Q(t)

    def R(self, edge, t):
        return self.edges[edge].R(t)

    def C(self, edge, t, s: float = 1.0):
        return s * self.edges[edge].C(t)

    @classmethod
    def uniform(cls, g: MetricGraph, P=1.0, Q=0.0, R=0.0, C=0.0) -> "SLCoefficients":
        return cls(g.fiber_dim, {e.id: EdgeCoefficients.constant(g.fiber_dim, P, Q, R, C)
                                 for e in g.edges})

    @classmethod
    def from_graph(cls, g: MetricGraph) -> "SLCoefficients":
        """Parse the graph document's ``coefficients``; missing edges get ``-x''``."""
        d = g.fiber_dim
        out = {}
        for e in g.edges:
            raw = g.coefficients.get(e.id)
            out[e.id] = (EdgeCoefficients.from_json(raw, d) if raw is not None
                         else EdgeCoefficients.constant(d))
        return cls(d, out)

    def with_edge(self, edge, coeffs: EdgeCoefficients) -> "SLCoefficients":
        new = dict(self.edges)
        new[edge] = coeffs
        return SLCoefficients(self.d, new)


def to_hamiltonian(c: SLCoefficients, edge, t: float, s: float = 0.0) -> np.ndarray:
    """Symmetric ``2d x 2d`` matrix ``B(t)`` with ``R`` replaced by ``R + C_s``."""
    ec = c[edge]
    p = ec.P(t)
    if np.linalg.cond(p) > 1e14:
        raise HamiltonianError(f"P is singular at t={t}")
    return ec.hamiltonian(t, s)


def random_coefficients(g: MetricGraph, rng: np.random.Generator,
                        r0_range: tuple[float, float] = (-10.0, 2.0),
                        r1_scale: float = 1.0, s_scale: float = 0.5,
                        q_scale: float = 0.0) -> SLCoefficients:
    """Legendre-convex draw ``P = I + S^T S``, ``R = R0 + R1 sin t``.

    ``R0`` has eigenvalues uniform in ``r0_range`` and ``R1`` is symmetric with
    spectral norm ``r1_scale``; both norms stay below 10.
    """
    d = g.fiber_dim
    out = {}
    for e in g.edges:
        s = s_scale * rng.standard_normal((d, d)) / math.sqrt(d)
        p = np.eye(d) + s.T @ s
        qmat = q_scale * rng.standard_normal((d, d))
        u, _ = np.linalg.qr(rng.standard_normal((d, d)))
        r0 = u @ np.diag(rng.uniform(*r0_range, size=d)) @ u.T
        r1 = rng.standard_normal((d, d))
        r1 = 0.5 * (r1 + r1.T)
        nrm = np.linalg.norm(r1, 2)
        r1 = r1_scale * r1 / nrm if nrm > 0 else r1
        out[e.id] = EdgeCoefficients(d, Constant(p), Constant(qmat),
                                     Fourier(0.5 * (r0 + r0.T), sin=[r1]),
                                     Constant(np.zeros((d, d))))
    return SLCoefficients(d, out)


# ---------------------------------------------------------------------------
# Integrators
# ---------------------------------------------------------------------------

_SQ15 = math.sqrt(15.0)
_GAUSS = np.array([0.5 - _SQ15 / 10, 0.5, 0.5 + _SQ15 / 10])


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def magnus6_generators(ec: EdgeCoefficients, t0: np.ndarray, h: np.ndarray,
                       s: float = 0.0) -> np.ndarray:
    """Sixth-order Magnus exponents for steps ``[t0, t0 + h]`` (vectorized)."""
    t0 = np.atleast_1d(np.asarray(t0, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), t0.shape)
    nodes = t0[:, None] + h[:, None] * _GAUSS[None, :]
    a = ec.generator(nodes, s) * h[:, None, None, None]
    a1, a2, a3 = a[:, 0], a[:, 1], a[:, 2]
    al1 = a2
    al2 = (_SQ15 / 3.0) * (a3 - a1)
    al3 = (10.0 / 3.0) * (a3 - 2.0 * a2 + a1)
    c1 = _comm(al1, al2)
    c2 = -(1.0 / 60.0) * _comm(al1, 2.0 * al3 + c1)
    return al1 + al3 / 12.0 + (1.0 / 240.0) * _comm(-20.0 * al1 - al3 + c1, al2 + c2)


def _rate(ec: EdgeCoefficients, a: float, b: float, s: float) -> float:
    ts = np.linspace(a, b, 65)
    g = ec.generator(ts, s)
    return float(max(np.linalg.norm(g, 2, axis=(-2, -1)).max(), 1e-12))


@dataclass(frozen=True)
class FlowSweep:
    """Monodromy ``M(sigma)`` on ``[a, b]`` from a fixed-step Magnus-6 propagator.

    ``nodes`` and ``mats`` hold ``M`` at the step points; evaluation between
    nodes takes one Magnus step from the node to the left.
    """

    coeffs: EdgeCoefficients = field(repr=False)
    a: float
    b: float
    s: float
    nodes: np.ndarray = field(repr=False)
    mats: np.ndarray = field(repr=False)

    def __call__(self, sigma: float) -> np.ndarray:
        sigma = float(sigma)
        if sigma < self.a - 1e-12 or sigma > self.b + 1e-12:
            raise ValueError(f"sigma={sigma} outside [{self.a}, {self.b}]")
        k = int(np.clip(np.searchsorted(self.nodes, sigma, side="right") - 1,
                        0, len(self.nodes) - 1))
        h = sigma - self.nodes[k]
        if h == 0.0:
            return self.mats[k].copy()
        om = magnus6_generators(self.coeffs, np.array([self.nodes[k]]), np.array([h]),
                                self.s)[0]
        return sla.expm(om) @ self.mats[k]

    @property
    def final(self) -> np.ndarray:
        return self.mats[-1]

    def max_residual(self) -> float:
        return float(max(symplectic_residual(m) for m in self.mats))


def flow_sweep(ec: EdgeCoefficients, a: float, b: float, s: float = 0.0,
               step: float = MAGNUS_STEP, min_steps: int = 16) -> FlowSweep:
    """Integrate ``M' = J B M``, ``M(a) = I`` on ``[a, b]`` with Magnus-6.

    The step satisfies ``h * max ||J B|| <= step``.
    """
    if not b > a:
        raise ValueError("flow_sweep needs a < b")
    n = max(min_steps, int(math.ceil((b - a) * _rate(ec, a, b, s) / step)))
    nodes = np.linspace(a, b, n + 1)
    om = magnus6_generators(ec, nodes[:-1], np.diff(nodes), s)
    steps = sla.expm(om)
    mats = chain_products(steps)
    return FlowSweep(ec, a, b, s, nodes, mats)


@dataclass(frozen=True)
class MonodromyResult:
    edge: Any
    sigma: float
    matrix: np.ndarray = field(repr=False)
    residual: float
    stats: dict = field(default_factory=dict)


def monodromy(c: SLCoefficients, edge, sigma: float, s: float = 0.0,
              start: float | None = None, method: str = "dop853",
              rtol: float = 1e-10, g: MetricGraph | None = None) -> MonodromyResult:
    """Fundamental matrix ``M(sigma)`` with ``M(start) = I``.

    ``start`` defaults to the edge's left endpoint when ``g`` is given, else 0.
    The adaptive DOP853 run is repeated with a halved tolerance (down to
    ``1e-13``) while the symplectic residual exceeds ``1e-9``.
    """
    ec = c[edge]
    if start is None:
        start = g.edge_map[edge].a if g is not None else 0.0
    if not math.isfinite(start) or not math.isfinite(sigma):
        raise ValueError("monodromy needs a bounded interval")
    d2 = 2 * ec.d
    if sigma == start:
        return MonodromyResult(edge, sigma, np.eye(d2), 0.0, {"method": method})
    if method == "magnus":
        lo, hi = min(start, sigma), max(start, sigma)
        m = flow_sweep(ec, lo, hi, s).final
        if sigma < start:
            m = np.linalg.inv(m)
        return MonodromyResult(edge, sigma, m, symplectic_residual(m), {"method": "magnus"})
    if method != "dop853":
        raise ValueError(f"unknown method {method!r}")
    j = symplectic_matrix_standard(ec.d)

    def rhs(t, y):
        return (j @ ec.hamiltonian(t, s) @ y.reshape(d2, d2)).ravel()

    tol = rtol
    while True:
        sol = solve_ivp(rhs, (start, sigma), np.eye(d2).ravel(), method="DOP853",
                        rtol=tol, atol=tol * 1e-2)
        if not sol.success:
            raise HamiltonianError(f"integrator failed on edge {edge!r}: {sol.message}")
        m = sol.y[:, -1].reshape(d2, d2)
        res = symplectic_residual(m)
        if res <= TOL_SYMPL or tol <= 1e-13:
            break
        tol *= 0.5
    if res > TOL_SYMPL:
        raise HamiltonianError(
            f"symplectic residual {res:.2e} on edge {edge!r} after tightening tolerances")
    return MonodromyResult(edge, sigma, m, res,
                           {"method": "dop853", "rtol": tol, "nfev": int(sol.nfev)})


# ---------------------------------------------------------------------------
# Half-lines
# ---------------------------------------------------------------------------


def _hyperbolic_split(gen: np.ndarray, stable: bool) -> np.ndarray:
    ev = np.linalg.eigvals(gen)
    scale = max(np.linalg.norm(gen, 2), 1e-300)
    gap = np.abs(ev.real).min()
    if gap <= 1e-8 * scale:
        raise NonHyperbolicError(
            "limiting system is not hyperbolic (essential spectrum at 0): "
            f"min |Re lambda| = {gap:.3e}")
    _, z, sdim = sla.schur(gen, output="real", sort="lhp" if stable else "rhp")
    d = gen.shape[0] // 2
    if sdim != d:
        raise NonHyperbolicError(f"stable dimension {sdim} differs from {d}")
    return z[:, :d]


def stable_subspace(c: SLCoefficients, edge, a: float, s: float = 0.0,
                    horizon: float = DEFAULT_HORIZON, direction: int = 1,
                    chunk: float = 1.0) -> LagrangianFrame:
    """Data at ``a`` of solutions decaying at infinity, a Lagrangian of ``R^{2d}``.

    ``direction=1`` treats the half-line ``[a, oo)`` (stable space of the
    limiting generator, transported back from ``a + horizon``);
    ``direction=-1`` treats ``(-oo, a]`` (unstable space transported forward
    from ``a - horizon``).  Transport is done in chunks with re-orthonormalization.
    """
    ec = c[edge]
    j = symplectic_matrix_standard(ec.d)
    lim_b = _limit_hamiltonian(ec, s, direction)
    frame = _hyperbolic_split(j @ lim_b, stable=direction > 0)
    far = a + direction * horizon
    n_chunks = max(1, int(math.ceil(horizon / chunk)))
    edges = np.linspace(far, a, n_chunks + 1)
    for t0, t1 in zip(edges[:-1], edges[1:]):
        lo, hi = min(t0, t1), max(t0, t1)
        m = flow_sweep(ec, lo, hi, s).final
        step = np.linalg.solve(m, frame) if t1 < t0 else m @ frame
        frame, _ = np.linalg.qr(step)
    out = LagrangianFrame(standard_form(ec.d), orthonormal_basis(frame))
    out.assert_lagrangian(1e-8)
    return out


def _limit_hamiltonian(ec: EdgeCoefficients, s: float, direction: int) -> np.ndarray:
    p = ec.P.limit(direction)
    q = ec.Q.limit(direction)
    r = ec.R.limit(direction) + s * ec.C.limit(direction)
    pinv = np.linalg.inv(p)
    b = np.block([[pinv, -pinv @ q], [-q.T @ pinv, q.T @ pinv @ q - r]])
    return 0.5 * (b + b.T)


# ---------------------------------------------------------------------------
# Cauchy data and conjugate instants
# ---------------------------------------------------------------------------


def edge_blocks(g: MetricGraph) -> dict:
    """Boundary-space rows of each finite endpoint: ``{(edge, end): (p_rows, q_rows)}``."""
    p_rows, q_rows, _ = boundary_index(g)
    out = {}
    for slot in g.slots[0] + g.slots[1]:
        k = g.config_rows(slot)
        out[(slot.edge, slot.end)] = (p_rows[k], q_rows[k])
    return out


def cauchy_data_lagrangian(g: MetricGraph, c: SLCoefficients, s: float = 0.0,
                           horizon: float = DEFAULT_HORIZON, method: str = "magnus",
                           sweeps: Mapping | None = None) -> LagrangianFrame:
    """Boundary traces of the kernel of the maximal operator.

    Bounded edges contribute ``Graph(M_j(b_j))`` and half-lines their decaying
    solution data at the finite end.  ``sweeps`` may supply precomputed
    monodromies keyed by edge id.
    """
    space = boundary_space(g)
    blocks = edge_blocks(g)
    d = g.fiber_dim
    cols = []
    for e in g.edges:
        if e.bounded:
            if sweeps is not None and e.id in sweeps:
                m = sweeps[e.id]
            else:
                m = monodromy(c, e.id, e.b, s, start=e.a, method=method).matrix
            z = np.vstack([np.eye(2 * d), m])  # (z_a, z_b)
            v = np.zeros((space.dim, 2 * d))
            pa, qa = blocks[(e.id, "a")]
            pb, qb = blocks[(e.id, "b")]
            v[pa], v[qa] = z[:d], z[d:2 * d]
            v[pb], v[qb] = z[2 * d:3 * d], z[3 * d:]
        elif e.has_a:
            w = stable_subspace(c, e.id, e.a, s, horizon, direction=1).basis
            v = np.zeros((space.dim, d))
            pa, qa = blocks[(e.id, "a")]
            v[pa], v[qa] = w[:d], w[d:]
        else:
            w = stable_subspace(c, e.id, e.b, s, horizon, direction=-1).basis
            v = np.zeros((space.dim, d))
            pb, qb = blocks[(e.id, "b")]
            v[pb], v[qb] = w[:d], w[d:]
        cols.append(v)
    frame = LagrangianFrame(space, orthonormal_basis(np.hstack(cols)))
    frame.assert_lagrangian(1e-7)
    return frame


def monodromy_graph(m: np.ndarray) -> LagrangianFrame:
    """``Graph(M)`` in ``(-Omega) + Omega``."""
    return graph_lagrangian(m, tol=1e-6)


def sweep_path(sweep: FlowSweep) -> LagrangianPath:
    """``sigma -> M(sigma) L_D`` in ``(R^{2d}, Omega)``."""
    d = sweep.coeffs.d
    space = standard_form(d)
    ld = dirichlet(space)

    def evaluator(sigma: float) -> LagrangianFrame:
        return LagrangianFrame(space, orthonormal_basis(sweep(sigma) @ ld.basis))

    grid = sweep.nodes if len(sweep.nodes) <= 1025 else np.linspace(sweep.a, sweep.b, 1025)
    return LagrangianPath(evaluator, (sweep.a, sweep.b), grid)


def conjugate_instants(c: SLCoefficients, edge, a: float, b: float, s: float = 0.0
                       ) -> list[tuple[float, int]]:
    """Interior ``sigma`` in ``(a, b)`` where ``y(a) = 0 = y(sigma)`` has solutions.

    Located as crossings of ``M(sigma) L_D`` with ``L_D``; the multiplicity is
    the nullity of the q-block ``M_qp(sigma)``, cross-checked against the
    crossing's kernel dimension.
    """
    sweep = flow_sweep(c[edge], a, b, s)
    return sweep_conjugate_instants(sweep)


def sweep_conjugate_instants(sweep: FlowSweep) -> list[tuple[float, int]]:
    d = sweep.coeffs.d
    path = sweep_path(sweep)
    ld = dirichlet(standard_form(d))
    try:
        crossings = detect_crossings((LagrangianPath.constant(ld, path.interval), path))
    except MaslovError as exc:
        raise HamiltonianError(f"conjugate instants unresolved: {exc}") from exc
    out = []
    for cr in crossings:
        if cr.endpoint:
            continue
        mq = sweep(cr.t)[d:, :d]
        sv = np.linalg.svd(mq, compute_uv=False)
        nullity = int(np.sum(sv <= 1e-6 * max(1.0, np.linalg.norm(sweep(cr.t), 2))))
        if nullity != cr.kernel_dim:
            raise HamiltonianError(
                f"multiplicity ambiguity at sigma={cr.t:.10g}: "
                f"q-block nullity {nullity}, crossing dimension {cr.kernel_dim}")
        out.append((cr.t, cr.kernel_dim))
    return out


def sweep_table(sweep: FlowSweep, n: int = 201) -> list[tuple[float, float, float]]:
    """Rows ``(sigma, scaled det of the q-block, smallest singular value)``.

    The determinant is scaled by the product of the column norms of the
    q-block columns of ``M(sigma)`` (QR with column pivoting) to avoid
    overflow.
    """
    d = sweep.coeffs.d
    rows = []
    for sigma in np.linspace(sweep.a, sweep.b, n):
        m = sweep(sigma)
        mq = m[d:, :d]
        _, r, _ = sla.qr(m[:, :d], mode="economic", pivoting=True)
        scale = float(np.prod(np.abs(np.diag(r)))) or 1.0
        det = float(np.linalg.det(mq)) / scale
        rows.append((float(sigma), det, float(np.linalg.svd(mq, compute_uv=False).min())))
    return rows
