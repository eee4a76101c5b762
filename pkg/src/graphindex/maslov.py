"""Crossing detection, crossing forms and the CLM Maslov index.

Crossings of a pair of Lagrangian paths are found from the eigenphases of the
unitary ``W(t) = G G^T`` with ``G = Z_1^* Z_2``, where ``Z_i = X_i + i Y_i`` is
the standardized frame of ``l_i(t)``.  ``W(t)`` has eigenvalue one exactly on
the intersection, so crossings are the parameters where an eigenphase passes
through zero.  Each located crossing carries the crossing form, computed by
finite differences, and the index is the signed sum of these forms with the
endpoint rule

    mu(l1, l2) = n+(G(a)) + sum_{a<t<b} sgn G(t) - n-(G(b)),

where ``G(t) = Q(l2) - Q(l1)`` restricted to ``l1(t) ^ l2(t)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .symplectic import (
    Inertia,
    LagrangianFrame,
    SymplecticForm,
    gap_distance,
    inertia,
    intersect,
    intersection_dim,
    orthonormal_basis,
)

GRID_POINTS = 256
GAP_LIMIT = 0.25
PHASE_STEP_LIMIT = np.pi / 4
FD_REL_STEP = 1e-5
RICHARDSON_RTOL = 1e-4
FORM_ATOL = 1e-7
FORM_RTOL = 1e-6
PERTURB_SIZE = 1e-7
PERTURB_ATTEMPTS = 5


class MaslovError(RuntimeError):
    """Raised when crossings cannot be resolved or remain degenerate."""


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LagrangianPath:
    """A sampled one-parameter family of Lagrangian subspaces.

    ``evaluator`` maps a parameter in ``interval`` to a :class:`LagrangianFrame`
    and must be a pure function.  ``grid`` defaults to 256 uniform samples.
    """

    evaluator: Callable[[float], LagrangianFrame]
    interval: tuple[float, float]
    grid: np.ndarray | None = field(default=None, repr=False)
    is_constant: bool = False

    def __post_init__(self):
        a, b = float(self.interval[0]), float(self.interval[1])
        if not b > a:
            raise ValueError("path interval must satisfy a < b")
        object.__setattr__(self, "interval", (a, b))
        if self.grid is None:
            object.__setattr__(self, "grid", np.linspace(a, b, GRID_POINTS))
        else:
            g = np.unique(np.concatenate([[a, b], np.asarray(self.grid, float)]))
            object.__setattr__(self, "grid", g[(g >= a) & (g <= b)])

    def __call__(self, t: float) -> LagrangianFrame:
        return self.evaluator(float(t))

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    @property
    def space(self) -> SymplecticForm:
        return self(self.a).space

    @classmethod
    def constant(cls, frame: LagrangianFrame, interval: tuple[float, float]) -> "LagrangianPath":
        return cls(lambda t: frame, interval, np.array(interval, float), is_constant=True)

    def restricted(self, a: float, b: float) -> "LagrangianPath":
        g = self.grid[(self.grid > a) & (self.grid < b)]
        return LagrangianPath(self.evaluator, (a, b), np.concatenate([[a], g, [b]]),
                              self.is_constant)

    def reversed(self) -> "LagrangianPath":
        a, b = self.interval
        ev = self.evaluator
        return LagrangianPath(lambda t: ev(a + b - t), (a, b), (a + b - self.grid)[::-1],
                              self.is_constant)

    def transformed(self, s: np.ndarray) -> "LagrangianPath":
        """Image of the path under a fixed linear symplectic map."""
        ev = self.evaluator
        return LagrangianPath(lambda t: ev(t).transformed(s), self.interval, self.grid,
                              self.is_constant)

    def refined(self, factor: int) -> "LagrangianPath":
        a, b = self.interval
        return LagrangianPath(self.evaluator, self.interval,
                              np.linspace(a, b, factor * (len(self.grid) - 1) + 1),
                              self.is_constant)

    def nudged(self, k: np.ndarray, size: float) -> "LagrangianPath":
        """Endpoint-preserving perturbation ``exp(size sin(pi s) J~ K) l(t)``."""
        a, b = self.interval
        ev = self.evaluator
        jt = self.space.complex_structure
        gen = jt @ k

        def evaluator(t: float) -> LagrangianFrame:
            bump = np.sin(np.pi * (t - a) / (b - a))
            return ev(t).transformed(sla.expm(size * bump * gen))

        return LagrangianPath(evaluator, self.interval, self.grid, False)


def concatenate(first: LagrangianPath, second: LagrangianPath) -> LagrangianPath:
    """Join two paths with ``first.b == second.a`` into a piecewise path."""
    if abs(first.b - second.a) > 1e-14 * max(1.0, abs(first.b)):
        raise ValueError("paths do not share an endpoint")
    mid = first.b
    f1, f2 = first.evaluator, second.evaluator

    def evaluator(t: float) -> LagrangianFrame:
        return f1(t) if t <= mid else f2(t)

    grid = np.concatenate([first.grid, second.grid])
    return LagrangianPath(evaluator, (first.a, second.b), grid,
                          first.is_constant and second.is_constant)


def direct_sum_path(paths: Sequence[LagrangianPath]) -> LagrangianPath:
    """Pointwise direct sum of paths sharing an interval."""
    from .symplectic import direct_sum

    interval = paths[0].interval
    grid = np.unique(np.concatenate([p.grid for p in paths]))
    evs = [p.evaluator for p in paths]
    return LagrangianPath(lambda t: direct_sum(*[e(t) for e in evs]), interval, grid,
                          all(p.is_constant for p in paths))


# ---------------------------------------------------------------------------
# Crossings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Crossing:
    """A crossing instant.

    ``form`` is ``G(l2, l1, t) = Q(l2) - Q(l1)`` on ``basis``, the form that
    enters the index of the pair ``(l1, l2)``.
    """

    t: float
    kernel_dim: int
    form: np.ndarray = field(repr=False)
    signature: Inertia
    regular: bool
    basis: np.ndarray = field(repr=False, default=None)
    endpoint: str = ""  # "a", "b" or "" for interior crossings
    fd_consistent: bool = True

    def contribution(self) -> int:
        if self.endpoint == "a":
            return self.signature.n_plus
        if self.endpoint == "b":
            return -self.signature.n_minus
        return self.signature.signature


def eigenphases(l1: LagrangianFrame, l2: LagrangianFrame) -> np.ndarray:
    """Eigenphases in (-pi, pi] of ``W = G G^T``; zeros mark the intersection."""
    g = l1.unitary().conj().T @ l2.unitary()
    return np.angle(np.linalg.eigvals(g @ g.T))


def _circle_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.abs(np.angle(np.exp(1j * (x - y))))


def _match(ref: np.ndarray, new: np.ndarray) -> tuple[np.ndarray, float]:
    """Align ``new`` to ``ref`` by the best cyclic shift of sorted phases."""
    n = len(ref)
    order_r = np.argsort(ref)
    sorted_new = np.sort(new)
    # row c holds sorted_new shifted left by c
    shifts = sorted_new[(np.arange(n)[:, None] + np.arange(n)[None, :]) % n]
    dists = _circle_dist(ref[order_r][None, :], shifts).max(axis=1)
    best_shift = int(np.argmin(dists))
    aligned = np.empty(n)
    aligned[order_r] = shifts[best_shift]
    return aligned, float(dists[best_shift])


def _fd_derivative(fun: Callable[[float], np.ndarray], t: float, h: float,
                   a: float, b: float) -> tuple[np.ndarray, bool]:
    """Derivative at ``t`` with Richardson comparison of steps ``h`` and ``h/2``."""

    def estimate(step: float) -> np.ndarray:
        if t - 2 * step >= a and t + 2 * step <= b:
            return (fun(t + step) - fun(t - step)) / (2 * step)
        if t - 2 * step < a:
            return (-3 * fun(t) + 4 * fun(t + step) - fun(t + 2 * step)) / (2 * step)
        return (3 * fun(t) - 4 * fun(t - step) + fun(t - 2 * step)) / (2 * step)

    d1 = estimate(h)
    d2 = estimate(h / 2)
    scale = max(np.abs(d2).max(initial=0.0), 1.0)
    ok = bool(np.abs(d1 - d2).max(initial=0.0) <= RICHARDSON_RTOL * scale)
    return (4 * d2 - d1) / 3, ok


def path_form(path: LagrangianPath, t: float, vectors: np.ndarray) -> tuple[np.ndarray, bool]:
    """``Q(l(t), l'(t))`` on the given vectors of ``l(t)``.

    For ``v`` in ``l(t)`` and the fixed transversal ``W = J~ l(t)``, ``w(s)`` in
    ``W`` is defined by ``v + w(s) in l(s)``; the form is ``d/ds omega(v, w(s))``.
    """
    k = vectors.shape[1]
    if path.is_constant or k == 0:
        return np.zeros((k, k)), True
    frame = path(t)
    space = frame.space
    wbasis = space.complex_structure @ frame.basis
    n = space.n

    def f(s: float) -> np.ndarray:
        u = path(s).basis
        coef = np.linalg.solve(np.hstack([u, -wbasis]), vectors)
        w = wbasis @ coef[n:]
        return space.omega(vectors, w)

    h = FD_REL_STEP * (path.b - path.a)
    d, ok = _fd_derivative(f, t, h, path.a, path.b)
    return 0.5 * (d + d.T), ok


def crossing_form(pair: tuple[LagrangianPath, LagrangianPath], t: float,
                  basis: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``G(l1, l2, t) = Q(l1) - Q(l2)`` on ``l1(t) ^ l2(t)``; returns ``(basis, form)``."""
    p1, p2 = pair
    if basis is None:
        basis = intersect(p1(t).basis, p2(t).basis)
    q1, _ = path_form(p1, t, basis)
    q2, _ = path_form(p2, t, basis)
    return basis, q1 - q2


def _form_inertia(form: np.ndarray) -> Inertia:
    if form.size == 0:
        return Inertia(0, 0, 0)
    scale = float(np.linalg.norm(form, 2))
    return inertia(form, rtol=FORM_RTOL, scale=scale, atol=FORM_ATOL, sym_tol=1e-3)


def _principal_basis(u: np.ndarray, v: np.ndarray, k: int) -> np.ndarray:
    """Averaged leading ``k`` principal vectors of two orthonormal frames."""
    a, _, bh = np.linalg.svd(u.T @ v, full_matrices=False)
    return orthonormal_basis(0.5 * (u @ a[:, :k] + v @ bh[:k].T))


def _make_crossing(p1: LagrangianPath, p2: LagrangianPath, t: float, endpoint: str,
                   kernel_dim: int | None = None) -> Crossing:
    if kernel_dim is None:
        basis = intersect(p1(t).basis, p2(t).basis)
    else:
        basis = _principal_basis(p1(t).basis, p2(t).basis, kernel_dim)
    q1, ok1 = path_form(p1, t, basis)
    q2, ok2 = path_form(p2, t, basis)
    form = q2 - q1
    sig = _form_inertia(form)
    return Crossing(t=float(t), kernel_dim=basis.shape[1], form=form, signature=sig,
                    regular=sig.n_zero == 0, basis=basis, endpoint=endpoint,
                    fd_consistent=ok1 and ok2)


class _PairSampler:
    """Caches frames and eigenphases of a pair of paths."""

    def __init__(self, p1: LagrangianPath, p2: LagrangianPath):
        self.p1, self.p2 = p1, p2
        self.cache: dict[float, tuple[LagrangianFrame, LagrangianFrame, np.ndarray]] = {}

    def __call__(self, t: float):
        t = float(t)
        hit = self.cache.get(t)
        if hit is None:
            f1, f2 = self.p1(t), self.p2(t)
            hit = (f1, f2, eigenphases(f1, f2))
            self.cache[t] = hit
        return hit


def detect_crossings(pair: tuple[LagrangianPath, LagrangianPath],
                     tol_rel: float = 1e-10, cluster_rel: float = 1e-8,
                     max_refine: int = 40) -> list[Crossing]:
    """All crossings of a pair of paths, endpoints included, sorted by parameter."""
    p1, p2 = pair
    if p1.interval != p2.interval:
        raise MaslovError("paths must share their parameter interval")
    if p1.space != p2.space:
        raise MaslovError("paths live in different symplectic spaces")
    a, b = p1.interval
    tol_t = tol_rel * (b - a)
    cluster = cluster_rel * (b - a)
    sample = _PairSampler(p1, p2)
    grid = np.unique(np.concatenate([p1.grid, p2.grid, np.linspace(a, b, GRID_POINTS)]))

    events: list[float] = []
    stack = [(grid[i], grid[i + 1], 0) for i in range(len(grid) - 1)][::-1]
    while stack:
        t0, t1, depth = stack.pop()
        f10, f20, ph0 = sample(t0)
        f11, f21, ph1 = sample(t1)
        aligned, disp = _match(ph0, ph1)
        coarse = (disp > PHASE_STEP_LIMIT
                  or (not p1.is_constant and gap_distance(f10, f11) > GAP_LIMIT)
                  or (not p2.is_constant and gap_distance(f20, f21) > GAP_LIMIT))
        if coarse:
            if depth >= max_refine:
                raise MaslovError(f"path not resolved near t={t0:.6g}; refine the grid")
            tm = 0.5 * (t0 + t1)
            stack.append((tm, t1, depth + 1))
            stack.append((t0, tm, depth + 1))
            continue
        for i in np.nonzero((np.abs(ph0) < np.pi / 2) & ((ph0 >= 0) != (aligned >= 0)))[0]:
            events.append(_locate(sample, t0, t1, int(i), tol_t))

    k_a = intersection_dim(p1(a), p2(a))
    k_b = intersection_dim(p1(b), p2(b))
    interior = sorted(t for t in events
                      if not ((k_a and t - a <= cluster) or (k_b and b - t <= cluster)))
    clusters: list[list[float]] = []
    for t in interior:
        if clusters and t - clusters[-1][-1] <= cluster:
            clusters[-1].append(t)
        else:
            clusters.append([t])

    crossings = []
    if k_a:
        crossings.append(_make_crossing(p1, p2, a, "a"))
    for group in clusters:
        t = float(np.mean(group))
        if intersection_dim(p1(t), p2(t), angle_tol=1e-6) == 0:
            raise MaslovError(
                f"unresolved crossing cluster near t={t:.10g}; refine the grid")
        # each eigenphase passing through zero contributes one kernel direction
        crossings.append(_make_crossing(p1, p2, t, "", kernel_dim=len(group)))
    if k_b:
        crossings.append(_make_crossing(p1, p2, b, "b"))
    return crossings


def _locate(sample: _PairSampler, t0: float, t1: float, idx: int, tol_t: float) -> float:
    """Bisect the sign change of eigenphase ``idx`` inside ``[t0, t1]``."""
    _, _, ref = sample(t0)
    left_sign = ref[idx] >= 0
    while t1 - t0 > tol_t:
        tm = 0.5 * (t0 + t1)
        _, _, ph = sample(tm)
        aligned, _ = _match(ref, ph)
        if (aligned[idx] >= 0) == left_sign:
            t0, ref = tm, aligned
        else:
            t1 = tm
    return 0.5 * (t0 + t1)


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaslovResult:
    value: int
    crossings: tuple[Crossing, ...]
    perturbed: bool = False
    attempts: int = 0

    def crossing_table(self) -> list[dict]:
        return [{"t": c.t, "kernel_dim": c.kernel_dim, "n_plus": c.signature.n_plus,
                 "n_minus": c.signature.n_minus, "n_zero": c.signature.n_zero,
                 "endpoint": c.endpoint, "contribution": c.contribution()}
                for c in self.crossings]

    def crossing_csv(self) -> str:
        buf = io.StringIO()
        fields = ["t", "kernel_dim", "n_plus", "n_minus", "n_zero", "endpoint", "contribution"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in self.crossing_table():
            row = dict(row)
            row["t"] = repr(row["t"])
            w.writerow(row)
        return buf.getvalue()


def _sum_crossings(crossings: Sequence[Crossing]) -> int:
    return int(sum(c.contribution() for c in crossings))


def maslov_index(pair: tuple[LagrangianPath, LagrangianPath], seed: int = 0,
                 perturb: bool = True) -> MaslovResult:
    """CLM index of a pair with crossings; degenerate crossings trigger nudging.

    Interior degeneracies are removed by an endpoint-preserving perturbation of
    the second path of size ``1e-7``; two independent perturbations must give
    the same integer.  Degenerate endpoint crossings raise.
    """
    crossings = detect_crossings(pair)
    for c in crossings:
        if c.endpoint and not c.regular:
            raise MaslovError(f"degenerate crossing at the endpoint t={c.t:.10g}")
    if all(c.regular for c in crossings):
        return MaslovResult(_sum_crossings(crossings), tuple(crossings))
    if not perturb:
        raise MaslovError("degenerate interior crossing and perturbation disabled")
    p1, p2 = pair
    rng = np.random.default_rng(seed)
    dim = p2.space.dim
    values: list[int] = []
    last: tuple[Crossing, ...] = ()
    for attempt in range(1, PERTURB_ATTEMPTS + 1):
        k = rng.standard_normal((dim, dim))
        k = 0.5 * (k + k.T)
        k /= np.linalg.norm(k, 2)
        nudged = p2.nudged(k, PERTURB_SIZE * max(1.0, _speed(p2)))
        try:
            cr = detect_crossings((p1, nudged))
        except MaslovError:
            continue
        if not all(c.regular for c in cr):
            continue
        values.append(_sum_crossings(cr))
        last = tuple(cr)
        if len(values) >= 2:
            if values[-1] == values[-2]:
                return MaslovResult(values[-1], last, perturbed=True, attempts=attempt)
            raise MaslovError(f"perturbed indices disagree: {values[-2]} versus {values[-1]}")
    raise MaslovError("irregular crossing persists after perturbation attempts")


def _speed(path: LagrangianPath) -> float:
    g = path.grid
    idx = np.linspace(0, len(g) - 1, min(len(g), 9)).astype(int)
    frames = [path(g[i]) for i in idx]
    dist = [gap_distance(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
    return float(max(dist, default=0.0))


def clm_index(pair: tuple[LagrangianPath, LagrangianPath], seed: int = 0) -> int:
    """``mu^CLM(l1, l2)`` over the common interval."""
    return maslov_index(pair, seed=seed).value


def clm_index_fixed(l0: LagrangianFrame, path: LagrangianPath, seed: int = 0) -> int:
    """``mu^CLM(L0, l(t))`` with a constant first path."""
    return clm_index((LagrangianPath.constant(l0, path.interval), path), seed=seed)


def clm_result_fixed(l0: LagrangianFrame, path: LagrangianPath, seed: int = 0) -> MaslovResult:
    return maslov_index((LagrangianPath.constant(l0, path.interval), path), seed=seed)


def frame_path(fun: Callable[[float], np.ndarray], space: SymplecticForm,
               interval: tuple[float, float], grid: np.ndarray | None = None,
               check: bool = False) -> LagrangianPath:
    """Wrap a function returning spanning vectors into a path of frames."""

    def evaluator(t: float) -> LagrangianFrame:
        v = fun(t)
        if check:
            return LagrangianFrame.from_span(space, v)
        return LagrangianFrame(space, orthonormal_basis(v))

    return LagrangianPath(evaluator, interval, grid)
