"""Executable index identities and structured reports.

Every scenario computes Morse indices (finite elements), Maslov indices
(crossing forms) and triple or Hörmander indices (symplectic linear algebra)
independently, then compares them as exact integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .graph import (
    MetricGraph,
    boundary_space,
    conditions_to_lagrangian,
    configuration_subspace,
    dirichlet_lagrangian,
    leaf_with_half_line,
    segment,
    star_graph,
    two_star,
)
from .hamiltonian import (
    Constant,
    EdgeCoefficients,
    Exponential,
    FlowSweep,
    SLCoefficients,
    cauchy_data_lagrangian,
    conjugate_instants,
    flow_sweep,
    random_coefficients,
    stable_subspace,
)
from .maslov import LagrangianPath, MaslovResult, clm_result_fixed
from .spectral import (
    DEFAULT_MESH,
    EPS_KERNEL,
    OperatorFamily,
    assemble,
    morse_index,
    spectral_flow,
)
from .symplectic import (
    LagrangianFrame,
    dirichlet,
    gap_distance,
    hormander_index,
    intersect,
    make_form,
    orthonormal_basis,
    symplectic_reduce,
    triple_index,
)

SCHEMA_VERSION = 1

CONVENTIONS = {
    "orientation": "star and two-star edges point from each centre to its leaves, "
                   "the connecting edge points from A to B; other edges run tail to head",
    "symplectic_form": "omega(x, y) = <J~ x, y> with J = [[0, -I], [I, 0]] in (p, q) order",
    "boundary_layout": "[p_a, q_a, p_b, q_b]; edges by ascending id; a-ends carry -Omega, "
                       "b-ends +Omega; momenta are quasi-Wronskians P x' + Q x",
    "clm_endpoints": "mu(l1, l2) = n+(G(a)) + sum of interior signatures - n-(G(b)) "
                     "with G = Q(l2) - Q(l1) on the intersection",
    "clm_sign_calibration": "Dirichlet conjugate points of a segment count +1 each",
    "spectral_flow": "sf = N(s0) - N(s1), N = number of eigenvalues below -eps_kernel",
    "triple_index": "iota(a, b, c) = n+ Q(a, b; c) + dim(a ^ c) - dim(a ^ b ^ c)",
}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    name: str
    lhs: int
    rhs: int
    status: str = ""  # "pass", "fail" or "indeterminate"

    def __post_init__(self):
        if not self.status:
            object.__setattr__(self, "status", "pass" if self.lhs == self.rhs else "fail")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self) -> str:
        """``iMor - mu_CLM = -1 (expected -1) PASS``; relations print both sides."""
        tag = self.status.upper()
        if "=" in self.name:
            return f"{self.name}: {self.lhs} vs {self.rhs} {tag}"
        return f"{self.name} = {self.lhs} (expected {self.rhs}) {tag}"


def _clean(x):
    """JSON-friendly copy with floats rounded to 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(x, Mapping):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


@dataclass
class IndexReport:
    scenario: str
    identities: list[Identity] = field(default_factory=list)
    quantities: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.identities)

    @property
    def failed(self) -> bool:
        return any(i.status == "fail" for i in self.identities)

    def add(self, name: str, lhs: int, rhs: int, indeterminate: bool = False) -> Identity:
        ident = Identity(name, int(lhs), int(rhs), "indeterminate" if indeterminate else "")
        self.identities.append(ident)
        return ident

    def identity(self, name: str) -> Identity:
        return next(i for i in self.identities if i.name == name)

    def to_dict(self) -> dict:
        return _clean({
            "schema": SCHEMA_VERSION,
            "scenario": self.scenario,
            "conventions": CONVENTIONS,
            "identities": [{"name": i.name, "lhs": i.lhs, "rhs": i.rhs, "status": i.status}
                           for i in self.identities],
            "quantities": self.quantities,
            "tolerances": self.tolerances,
            "provenance": self.provenance,
            "notes": self.notes,
            "passed": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def lines(self) -> list[str]:
        return [f"[{self.scenario}] {i.line()}" for i in self.identities]


def merge_reports(reports: Sequence[IndexReport]) -> dict:
    """Deterministic batch document, reports sorted by scenario id."""
    ordered = sorted(reports, key=lambda r: r.scenario)
    return {"schema": SCHEMA_VERSION, "conventions": CONVENTIONS,
            "reports": [r.to_dict() for r in ordered],
            "passed": all(r.passed for r in ordered)}


def _tolerances(eps: float, mesh_n: int, horizon: float | None = None) -> dict:
    tol = {"eps_kernel": eps, "mesh_n": mesh_n, "crossing_bisection_rel": 1e-10,
           "fd_rel_step": 1e-5, "symplectic_residual": 1e-9}
    if horizon is not None:
        tol["horizon"] = horizon
    return tol


def _crossings(res: MaslovResult) -> list[dict]:
    return res.crossing_table()


# ---------------------------------------------------------------------------
# Paths used by the harness
# ---------------------------------------------------------------------------


class _Memo:
    """Memoize a frame-valued function of one float (pure evaluators only)."""

    def __init__(self, fn: Callable[[float], LagrangianFrame]):
        self.fn, self.cache = fn, {}

    def __call__(self, t: float) -> LagrangianFrame:
        t = float(t)
        out = self.cache.get(t)
        if out is None:
            out = self.fn(t)
            self.cache[t] = out
        return out


def shrinking_sweeps(g: MetricGraph, c: SLCoefficients, s: float = 0.0) -> dict:
    """Magnus sweeps over every bounded edge, keyed by edge id."""
    return {e.id: flow_sweep(c[e.id], e.a, e.b, s) for e in g.edges if e.bounded}


def conjugate_sweep_path(g: MetricGraph, c: SLCoefficients,
                         sweeps: Mapping[Any, FlowSweep] | None = None) -> LagrangianPath:
    """``sigma -> (+) Graph(M_j(a_j + sigma l_j))`` on ``[0, 1]`` (compact graphs)."""
    if not g.compact:
        raise ValueError("the conjugate sweep path needs a compact graph")
    sweeps = shrinking_sweeps(g, c) if sweeps is None else sweeps
    edges = g.edges

    def evaluator(sigma: float) -> LagrangianFrame:
        mats = {e.id: sweeps[e.id](e.a + sigma * e.length) for e in edges}
        return cauchy_data_lagrangian(g, c, sweeps=mats)

    return LagrangianPath(_Memo(evaluator), (0.0, 1.0))


def cauchy_family_path(g: MetricGraph, c: SLCoefficients, horizon: float = 20.0,
                       interval: tuple[float, float] = (0.0, 1.0)) -> LagrangianPath:
    """``s -> Cauchy data of L_s`` for the family ``C_s = s C``."""

    def evaluator(s: float) -> LagrangianFrame:
        return cauchy_data_lagrangian(g, c, s, horizon=horizon)

    return LagrangianPath(_Memo(evaluator), interval)


# ---------------------------------------------------------------------------
# Morse index theorem
# ---------------------------------------------------------------------------


def verify_morse_index_theorem(g: MetricGraph, c: SLCoefficients, mesh_n: int = DEFAULT_MESH,
                               eps: float = EPS_KERNEL, scenario: str = "morse-theorem"
                               ) -> IndexReport:
    """``iMor(L_{Lambda_D}) = sum over edges of conjugate multiplicities``."""
    if not g.compact:
        raise ValueError("the Morse index theorem is verified on compact graphs")
    rep = IndexReport(scenario, tolerances=_tolerances(eps, mesh_n))
    op = assemble(g, c, dirichlet_lagrangian(g), mesh_n)
    mr = morse_index(op, eps)
    instants = {}
    total = 0
    for e in g.edges:
        pts = conjugate_instants(c, e.id, e.a, e.b)
        instants[str(e.id)] = [{"sigma": t, "multiplicity": k} for t, k in pts]
        total += sum(k for _, k in pts)
    rep.quantities = {"morse_index_dirichlet": mr.index, "conjugate_instants": instants,
                      "near_zero_eigenvalues": list(mr.near_zero)}
    rep.provenance = {"mesh_sizes": list(mr.mesh_sizes), "edges": g.m,
                      "fiber_dim": g.fiber_dim}
    rep.add("iMor(Dirichlet) = sum of conjugate multiplicities", mr.index, total,
            indeterminate=mr.indeterminate)
    return rep


# ---------------------------------------------------------------------------
# Spectral flow formula
# ---------------------------------------------------------------------------


def verify_spectral_flow_formula(g: MetricGraph, c: SLCoefficients,
                                 lagrangian: LagrangianFrame | None = None,
                                 mesh_n: int = DEFAULT_MESH, eps: float = EPS_KERNEL,
                                 horizon: float = 20.0, seed: int = 0,
                                 scenario: str = "sf-formula") -> IndexReport:
    """``sf(L_s) = -mu(Lambda, Cauchy data of L_s)`` for the family ``C_s = s C``."""
    lam = conditions_to_lagrangian(g) if lagrangian is None else lagrangian
    rep = IndexReport(scenario, tolerances=_tolerances(eps, mesh_n,
                                                       None if g.compact else horizon))
    fam = OperatorFamily(g, c, lam, mesh_n, horizon)
    sf = spectral_flow(fam, eps=eps)
    mu = clm_result_fixed(lam, cauchy_family_path(g, c, horizon), seed=seed)
    rep.quantities = {"spectral_flow": sf.value, "mu_clm": mu.value,
                      "sf_crossings": [{"s": s, "change": k} for s, k in sf.crossings],
                      "maslov_crossings": _crossings(mu)}
    rep.provenance = {"seed": seed, "edges": g.m, "fiber_dim": g.fiber_dim,
                      "s_grid_points": len(sf.grid), "perturbed": mu.perturbed}
    rep.add("sf = -mu_CLM(Lambda, Cauchy data)", sf.value, -mu.value)
    return rep


# ---------------------------------------------------------------------------
# Morse difference formulas
# ---------------------------------------------------------------------------


def verify_morse_difference(g: MetricGraph, c: SLCoefficients, lam0: LagrangianFrame,
                            lam1: LagrangianFrame, mesh_n: int = DEFAULT_MESH,
                            eps: float = EPS_KERNEL, conormal: tuple | None = None,
                            scenario: str = "morse-difference") -> IndexReport:
    """Morse index differences across boundary conditions as triple indices.

    ``conormal=(V0, V1)`` adds the dimension count for conormal pairs.
    """
    rep = IndexReport(scenario, tolerances=_tolerances(eps, mesh_n))
    lam_d = dirichlet_lagrangian(g)
    cd = cauchy_data_lagrangian(g, c)
    results = {name: morse_index(assemble(g, c, lam, mesh_n), eps)
               for name, lam in (("lambda0", lam0), ("lambda1", lam1), ("dirichlet", lam_d))}
    indet = any(r.indeterminate for r in results.values())
    i0, i1, i_d = (results[k].index for k in ("lambda0", "lambda1", "dirichlet"))
    t_c10 = triple_index(cd, lam1, lam0)
    t_10d = triple_index(lam1, lam0, lam_d)
    t_c0d = triple_index(cd, lam0, lam_d)
    t_c1d = triple_index(cd, lam1, lam_d)
    rep.quantities = {"morse_index": {k: r.index for k, r in results.items()},
                      "near_zero_eigenvalues": {k: list(r.near_zero) for k, r in results.items()},
                      "iota(cauchy, lambda1, lambda0)": t_c10,
                      "iota(lambda1, lambda0, dirichlet)": t_10d,
                      "iota(cauchy, lambda0, dirichlet)": t_c0d,
                      "iota(cauchy, lambda1, dirichlet)": t_c1d}
    rep.add("iMor(L1) - iMor(L0) = iota(Cd, L1, L0) - iota(L1, L0, LD)", i1 - i0,
            t_c10 - t_10d, indet)
    rep.add("iMor(L0) - iMor(LD) = iota(Cd, L0, LD)", i0 - i_d, t_c0d, indet)
    rep.add("iMor(L1) - iMor(LD) = iota(Cd, L1, LD)", i1 - i_d, t_c1d, indet)
    if conormal is not None:
        v0, v1 = (orthonormal_basis(np.asarray(v, float)) for v in conormal)
        dim_sum = orthonormal_basis(np.hstack([v1, v0])).shape[1]
        rep.add("iota(L1, L0, LD) = dim(V1 + V0) - dim V1", t_10d, dim_sum - v1.shape[1])
    rep.provenance = {"mesh_sizes": {k: list(r.mesh_sizes) for k, r in results.items()}}
    return rep


# ---------------------------------------------------------------------------
# Star and two-star formulas
# ---------------------------------------------------------------------------


def _star_chain(g: MetricGraph, c: SLCoefficients, mesh_n: int, eps: float, seed: int,
                rep: IndexReport) -> dict:
    """Shared computation for stars and two-stars (Dirichlet leaves, Kirchhoff centres)."""
    d, m = g.fiber_dim, g.m
    lam0 = conditions_to_lagrangian(g)
    lam_d = dirichlet_lagrangian(g)
    mr0 = morse_index(assemble(g, c, lam0, mesh_n), eps)
    mr_d = morse_index(assemble(g, c, lam_d, mesh_n), eps)
    sweeps = shrinking_sweeps(g, c)
    path = conjugate_sweep_path(g, c, sweeps)
    mu0 = clm_result_fixed(lam0, path, seed=seed)
    mu_d = clm_result_fixed(lam_d, path, seed=seed)
    gamma0, gamma1 = path(0.0), path(1.0)
    iota_end = triple_index(gamma1, lam0, lam_d)
    iota_id = triple_index(gamma0, lam0, lam_d)
    s_h = hormander_index(gamma0, gamma1, lam0, lam_d)
    residual = max(sw.max_residual() for sw in sweeps.values())
    rep.quantities.update({
        "morse_index_lambda0": mr0.index, "morse_index_dirichlet": mr_d.index,
        "mu_clm_lambda0": mu0.value, "mu_clm_dirichlet": mu_d.value,
        "iota(gamma(1), lambda0, dirichlet)": iota_end,
        "iota(graph(I), lambda0, dirichlet)": iota_id,
        "hormander(graph(I), gamma(1); lambda0, dirichlet)": s_h,
        "maslov_crossings_lambda0": _crossings(mu0),
        "near_zero_eigenvalues": list(mr0.near_zero) + list(mr_d.near_zero),
        "max_symplectic_residual": residual,
    })
    rep.provenance.update({"seed": seed, "edges": m, "fiber_dim": d,
                           "mesh_sizes": list(mr0.mesh_sizes),
                           "lengths": [e.length for e in g.edges]})
    indet = mr0.indeterminate or mr_d.indeterminate
    rep.add("iMor(L0) - iMor(LD) = iota(gamma(1), L0, LD)", mr0.index - mr_d.index,
            iota_end, indet)
    rep.add("iMor(LD) - mu(LD, gamma) = -md", mr_d.index - mu_d.value, -m * d, indet)
    rep.add("mu(LD, gamma) - mu(L0, gamma) = s(graph(I), gamma(1); L0, LD)",
            mu_d.value - mu0.value, s_h)
    rep.add("iota(gamma(1),L0,LD) - md + s(...) = -md + iota(graph(I),L0,LD)",
            iota_end - m * d + s_h, -m * d + iota_id)
    rep.add("iMor(L0) - mu(L0, gamma) = -md + iota(graph(I), L0, LD)",
            mr0.index - mu0.value, -m * d + iota_id, indet)
    return {"imor": mr0.index, "mu": mu0.value, "iota_id": iota_id, "indet": indet}


def _draw(g: MetricGraph, seed: int | None, coeffs: SLCoefficients | None
          ) -> SLCoefficients:
    if coeffs is not None:
        return coeffs
    if seed is None:
        return SLCoefficients.uniform(g)
    return random_coefficients(g, np.random.default_rng(seed))


def random_lengths(m: int, seed: int) -> list[float]:
    rng = np.random.default_rng([seed, 7919])
    return [float(x) for x in rng.uniform(1.0, 2.5, size=m)]


def verify_star_formula(m: int, d: int, coeffs: SLCoefficients | None = None,
                        seed: int | None = 0, lengths: Sequence[float] | None = None,
                        mesh_n: int = DEFAULT_MESH, eps: float = EPS_KERNEL) -> IndexReport:
    """``iMor - mu = -m(d-1)`` on a star with Dirichlet leaves and Kirchhoff centre.

    ``seed=None`` with no coefficients uses ``-x''`` on unit edges.  The report
    also carries every link of the identity chain.
    """
    if lengths is None:
        lengths = [1.0] * m if seed is None else random_lengths(m, seed)
    g = star_graph(m, lengths, d)
    c = _draw(g, seed, coeffs)
    rep = IndexReport(f"star-m{m}-d{d}-seed{seed}", tolerances=_tolerances(eps, mesh_n))
    out = _star_chain(g, c, mesh_n, eps, seed or 0, rep)
    rep.add("iota(graph(I), L0, LD) = d", out["iota_id"], d)
    primary = rep.add("iMor - mu_CLM", out["imor"] - out["mu"], -m * (d - 1),
                      out["indet"])
    rep.quantities["difference"] = primary.lhs
    rep.quantities["expected"] = primary.rhs
    return rep


def verify_two_star_formula(m_a: int, m_b: int, d: int, coeffs: SLCoefficients | None = None,
                            seed: int | None = 0, lengths: Sequence[float] | None = None,
                            mesh_n: int = DEFAULT_MESH, eps: float = EPS_KERNEL
                            ) -> IndexReport:
    """``iMor - mu = -(m_A + m_B - 1) d`` with intermediate triple index ``2d``."""
    m = m_a + m_b + 1
    if lengths is None:
        lengths = [1.0] * m if seed is None else random_lengths(m, seed)
    g = two_star(m_a, m_b, lengths, d)
    c = _draw(g, seed, coeffs)
    rep = IndexReport(f"two-star-{m_a}-{m_b}-d{d}-seed{seed}",
                      tolerances=_tolerances(eps, mesh_n))
    out = _star_chain(g, c, mesh_n, eps, seed or 0, rep)
    rep.add("iota(graph(I), L0, LD) = 2d", out["iota_id"], 2 * d)
    primary = rep.add("iMor - mu_CLM", out["imor"] - out["mu"],
                      -(m_a + m_b - 1) * d, out["indet"])
    rep.quantities["difference"] = primary.lhs
    rep.quantities["expected"] = primary.rhs
    return rep


def verify_segment_recovery(d: int, seed: int | None = 0, mesh_n: int = DEFAULT_MESH,
                            eps: float = EPS_KERNEL) -> IndexReport:
    """``two_star(1, 1)`` against the same operator on one segment, and ``-d``.

    The two-star with unit-free lengths ``l0, l1, l2`` is the segment
    ``[0, l0 + l1 + l2]`` traversed leaf to leaf; coefficients are constant on
    each edge so the segment carries the reversed first edge, then the other two.
    """
    lengths = [1.0, 1.0, 1.0] if seed is None else random_lengths(3, seed)
    g2 = two_star(1, 1, lengths, d)
    if seed is None:
        c2 = SLCoefficients.uniform(g2)
    else:
        rng = np.random.default_rng(seed)
        per_edge = {}
        for e in g2.edges:
            s = 0.5 * rng.standard_normal((d, d)) / math.sqrt(d)
            u, _ = np.linalg.qr(rng.standard_normal((d, d)))
            r = u @ np.diag(rng.uniform(-10.0, 2.0, size=d)) @ u.T
            per_edge[e.id] = EdgeCoefficients.constant(d, np.eye(d) + s.T @ s, 0.0,
                                                       0.5 * (r + r.T))
        c2 = SLCoefficients(d, per_edge)
    rep = verify_two_star_formula(1, 1, d, c2, seed, lengths, mesh_n, eps)
    rep.scenario = f"segment-recovery-d{d}-seed{seed}"

    # the same operator on a single segment, edges laid end to end
    total = float(sum(lengths))
    seg = segment(total, d)
    bps = [0.0, lengths[0], lengths[0] + lengths[1], total]
    ts, vals = [], {"P": [], "R": []}
    for k, eid in enumerate((0, 1, 2)):
        ec = c2[eid]
        lo, hi = bps[k], bps[k + 1]
        for t in (lo + 1e-12 if k else lo, hi - 1e-12 if k < 2 else hi):
            ts.append(t)
            vals["P"].append(ec.P(0.0))
            vals["R"].append(ec.R(0.0))
    from .hamiltonian import Table

    seg_c = SLCoefficients(d, {0: EdgeCoefficients(d, Table(ts, vals["P"]),
                                                   Constant(np.zeros((d, d))),
                                                   Table(ts, vals["R"]),
                                                   Constant(np.zeros((d, d))))})
    seg_rep = IndexReport("segment")
    seg_out = _star_chain(seg, seg_c, mesh_n, eps, seed or 0, seg_rep)
    rep.quantities["segment_difference"] = seg_out["imor"] - seg_out["mu"]
    rep.quantities["segment_morse_index"] = seg_out["imor"]
    rep.add("two_star(1,1) iMor = segment iMor", rep.quantities["morse_index_lambda0"],
            seg_out["imor"])
    rep.add("two_star(1,1) difference = segment difference", rep.quantities["difference"],
            seg_out["imor"] - seg_out["mu"])
    rep.add("segment difference = -d", seg_out["imor"] - seg_out["mu"], -d)
    return rep


# ---------------------------------------------------------------------------
# Reduction on a leaf with a half-line
# ---------------------------------------------------------------------------


def reduction_coefficients(d: int, seed: int, c_strength: float = 30.0,
                           kappa: float = 1.5) -> SLCoefficients:
    """Random bounded edge plus an asymptotically constant hyperbolic tail.

    Edge 0 carries ``R = R0 + R1 sin t`` and ``C = -c I``; the half-line carries
    ``R = kappa^2 I + A exp(-|t - 1|)`` with a small symmetric ``A`` and no
    ``C`` term, so the essential spectrum stays away from zero for all ``s``.
    """
    g = leaf_with_half_line(d)
    rng = np.random.default_rng(seed)
    base = random_coefficients(g, rng)
    a = rng.standard_normal((d, d))
    a = 0.25 * (a + a.T) / max(np.linalg.norm(a + a.T, 2), 1e-12)
    e0 = base[0]
    e0 = EdgeCoefficients(d, e0.P, e0.Q, e0.R, Constant(-c_strength * np.eye(d)))
    e1 = EdgeCoefficients(d, Constant(np.eye(d)), Constant(np.zeros((d, d))),
                          Exponential(kappa ** 2 * np.eye(d), a, 1.0, 1.0),
                          Constant(np.zeros((d, d))))
    return SLCoefficients(d, {0: e0, 1: e1})


def verify_reduction(d: int = 1, seed: int = 0, horizon: float = 20.0,
                     mesh_n: int = DEFAULT_MESH, eps: float = EPS_KERNEL,
                     coeffs: SLCoefficients | None = None) -> IndexReport:
    """Full-space against reduced Maslov index on a leaf edge joined to a half-line.

    Full: ``mu(Lambda_D + Kirchhoff, Graph(M_s(1)) + W_s(1))`` in the boundary
    space.  Reduced: ``mu(L_D, M_s(1)^-1 W_s(1))`` in ``(R^{2d}, -Omega)``, the
    data at the Dirichlet end of solutions that continue into decaying
    solutions on the half-line.  The spectral flow of the truncated operator is
    compared as well.
    """
    g = leaf_with_half_line(d)
    c = reduction_coefficients(d, seed) if coeffs is None else coeffs
    lam = conditions_to_lagrangian(g)
    rep = IndexReport(f"reduction-d{d}-seed{seed}",
                      tolerances=_tolerances(eps, mesh_n, horizon))
    full_path = cauchy_family_path(g, c, horizon)
    mu_full = clm_result_fixed(lam, full_path, seed=seed)

    edge0 = g.edge_map[0]
    red_space = make_form([(d, -1)])

    def reduced(s: float) -> LagrangianFrame:
        m = flow_sweep(c[0], edge0.a, edge0.b, s).final
        w = stable_subspace(c, 1, edge0.b, s, horizon).basis
        return LagrangianFrame(red_space, orthonormal_basis(np.linalg.solve(m, w)))

    red_path = LagrangianPath(_Memo(reduced), (0.0, 1.0))
    mu_red = clm_result_fixed(dirichlet(red_space), red_path, seed=seed)

    # cross-check: symplectic reduction of the full Cauchy data by the junction part
    space = boundary_space(g)
    eps_sub = _junction_part(g, lam.basis)
    complement = np.zeros((space.dim, 2 * d))
    p_rows = np.arange(d)
    q_rows = g.n_a + np.arange(d)
    complement[p_rows, np.arange(d)] = 1.0
    complement[q_rows, d + np.arange(d)] = 1.0
    gaps = []
    for s in (0.0, 0.5, 1.0):
        reduced_frame = symplectic_reduce(full_path(s), eps_sub, complement, red_space)
        gaps.append(gap_distance(reduced_frame, reduced(s)))

    fam = OperatorFamily(g, c, lam, mesh_n, horizon)
    sf = spectral_flow(fam, eps=eps)
    rep.quantities = {"mu_full": mu_full.value, "mu_reduced": mu_red.value,
                      "spectral_flow": sf.value, "reduction_gap": max(gaps),
                      "maslov_crossings_full": _crossings(mu_full),
                      "maslov_crossings_reduced": _crossings(mu_red)}
    rep.provenance = {"seed": seed, "fiber_dim": d, "horizon": horizon}
    rep.add("-mu(full) = -mu(reduced)", -mu_full.value, -mu_red.value)
    rep.add("sf = -mu(full)", sf.value, -mu_full.value)
    rep.add("reduced frames agree with symplectic reduction", int(max(gaps) < 1e-6), 1)
    return rep


def _junction_part(g: MetricGraph, basis: np.ndarray) -> np.ndarray:
    """Vectors of a conditions frame that vanish at the Dirichlet end of edge 0."""
    d = g.fiber_dim
    rows = np.concatenate([np.arange(d), g.n_a + np.arange(d)])
    away = np.delete(np.eye(basis.shape[0]), rows, axis=1)
    return intersect(basis, away)


# ---------------------------------------------------------------------------
# Euler-Lagrange residual
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticDensity:
    """``L(t, q, v) = 1/2 <P v, v> + <Q q, v> + 1/2 <R q, q>`` edge by edge."""

    coeffs: SLCoefficients

    def momentum(self, edge, t, x, dx) -> np.ndarray:
        return self.coeffs.P(edge, t) @ dx + self.coeffs.Q(edge, t) @ x

    def el_residual(self, edge, t, x, dx, ddx, h: float = 1e-5) -> np.ndarray:
        """``d/dt dL/dv - dL/dq`` with coefficient derivatives by central differences."""
        c = self.coeffs
        p, q, r = c.P(edge, t), c.Q(edge, t), c.R(edge, t)
        dp = (c.P(edge, t + h) - c.P(edge, t - h)) / (2 * h)
        dq = (c.Q(edge, t + h) - c.Q(edge, t - h)) / (2 * h)
        ddt = dp @ dx + p @ ddx + dq @ x + q @ dx
        return ddt - (q.T @ dx + r @ x)


EdgeCandidate = Callable[[float], tuple[np.ndarray, np.ndarray, np.ndarray]]


def euler_lagrange_residual(g: MetricGraph, density: QuadraticDensity,
                            x: Mapping[Any, EdgeCandidate],
                            offset: np.ndarray | None = None,
                            w: np.ndarray | None = None, n_points: int = 64) -> float:
    """Largest violation of the Euler-Lagrange system of an extremal candidate.

    ``x[edge](t)`` returns ``(x, x', x'')``.  The boundary condition is the
    affine configuration set ``q in offset + W`` (default: the graph's vertex
    conditions with the graph's offset), with the transversality condition
    ``p~ orthogonal to W``.  The result is the maximum of the interior residual
    over Gauss points, the distance of the configuration trace to the affine set
    and the size of the tangential momentum.
    """
    w = configuration_subspace(g) if w is None else np.asarray(w, dtype=float)
    wb = orthonormal_basis(w) if w.size else np.zeros((g.config_dim, 0))
    offset = (g.offset if g.offset is not None else np.zeros(g.config_dim)) \
        if offset is None else np.asarray(offset, dtype=float)
    worst = 0.0
    nodes, _ = np.polynomial.legendre.leggauss(n_points)
    for e in g.edges:
        if not e.bounded:
            raise ValueError("Euler-Lagrange residual needs bounded edges")
        for t in 0.5 * (e.a + e.b) + 0.5 * e.length * nodes:
            xv, dxv, ddxv = (np.atleast_1d(np.asarray(v, float)) for v in x[e.id](t))
            worst = max(worst, float(np.abs(density.el_residual(e.id, t, xv, dxv,
                                                                ddxv)).max()))
    q = np.zeros(g.config_dim)
    pt = np.zeros(g.config_dim)
    for sl in g.slots[0] + g.slots[1]:
        e = g.edge_map[sl.edge]
        t = e.a if sl.end == "a" else e.b
        xv, dxv, _ = (np.atleast_1d(np.asarray(v, float)) for v in x[e.id](t))
        rows = g.config_rows(sl)
        q[rows] = xv
        p = density.momentum(e.id, t, xv, dxv)
        pt[rows] = -p if sl.end == "a" else p
    dev = q - offset
    tangency = float(np.linalg.norm(dev - wb @ (wb.T @ dev)))
    transversality = float(np.linalg.norm(wb.T @ pt)) if wb.shape[1] else 0.0
    return max(worst, tangency, transversality)


# ---------------------------------------------------------------------------
# Standard batches
# ---------------------------------------------------------------------------


def segment_coefficients(omega: float, d: int) -> tuple[MetricGraph, SLCoefficients]:
    g = segment(1.0, d)
    return g, SLCoefficients.uniform(g, R=-omega * omega)


def sf_family(kind: str, c_strength: float, seed: int, d: int = 1
              ) -> tuple[MetricGraph, SLCoefficients]:
    """Segment or 3-star with random Legendre-convex coefficients and ``C_s = -s c I``."""
    if kind == "segment":
        g = segment(1.0, d)
    elif kind == "star3":
        g = star_graph(3, random_lengths(3, seed), d)
    else:
        raise ValueError(f"unknown family {kind!r}")
    base = random_coefficients(g, np.random.default_rng(seed), r0_range=(0.0, 2.0),
                               r1_scale=0.5)
    edges = {eid: EdgeCoefficients(d, ec.P, ec.Q, ec.R, Constant(-c_strength * np.eye(d)))
             for eid, ec in base.edges.items()}
    return g, SLCoefficients(d, edges)


def random_conormal(g: MetricGraph, rng: np.random.Generator) -> np.ndarray:
    """Random configuration subspace of random dimension."""
    n = g.config_dim
    k = int(rng.integers(0, n + 1))
    return orthonormal_basis(rng.standard_normal((n, k))) if k else np.zeros((n, 0))


def verify_segment_morse_theorem(omega: float, d: int = 1, mesh_n: int = DEFAULT_MESH,
                                 eps: float = EPS_KERNEL, instant_tol: float = 1e-6
                                 ) -> IndexReport:
    """``-x'' - omega^2 x`` on ``[0, 1]``: index ``d floor(omega / pi)`` at ``k pi / omega``."""
    g, c = segment_coefficients(omega, d)
    rep = verify_morse_index_theorem(g, c, mesh_n, eps,
                                     scenario=f"morse-theorem-omega{omega / math.pi:.4g}pi-d{d}")
    k_max = int(math.floor(omega / math.pi - 1e-12))
    exact = [k * math.pi / omega for k in range(1, k_max + 1)]
    found = rep.quantities["conjugate_instants"]["0"]
    times = [row["sigma"] for row in found]
    mults = [row["multiplicity"] for row in found]
    dev = max((abs(a - b) for a, b in zip(times, exact)), default=0.0)
    matched = len(times) == len(exact) and dev <= instant_tol and all(m == d for m in mults)
    rep.quantities["expected_instants"] = exact
    rep.quantities["max_instant_deviation"] = dev if len(times) == len(exact) else math.inf
    rep.add("iMor(Dirichlet) = d floor(omega/pi)", rep.quantities["morse_index_dirichlet"],
            d * k_max)
    rep.add("conjugate instants at k pi/omega with multiplicity d (1 = yes)", int(matched), 1)
    return rep


def segment_conormal_pairs(d: int, seed: int) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Configuration subspaces for Dirichlet, Neumann and random conormal pairs."""
    g = segment(1.0, d)
    rng = np.random.default_rng([seed, 104729])
    n = g.config_dim
    zero, full = np.zeros((n, 0)), np.eye(n)
    c1 = orthonormal_basis(rng.standard_normal((n, int(rng.integers(1, n)))))
    c2 = orthonormal_basis(rng.standard_normal((n, int(rng.integers(1, n)))))
    return [("dirichlet-neumann", zero, full), ("neumann-dirichlet", full, zero),
            ("dirichlet-conormal", zero, c1), ("neumann-conormal", full, c1),
            ("conormal-conormal", c1, c2)]


def verify_segment_morse_difference(omega: float, d: int = 1, seed: int = 0,
                                    mesh_n: int = DEFAULT_MESH, eps: float = EPS_KERNEL
                                    ) -> list[IndexReport]:
    """Morse-difference identities for ``-x'' - omega^2 x`` on ``[0, 1]``."""
    from .graph import conormal_frame

    g, c = segment_coefficients(omega, d)
    out = []
    for label, v0, v1 in segment_conormal_pairs(d, seed):
        rep = verify_morse_difference(
            g, c, conormal_frame(g, v0), conormal_frame(g, v1), mesh_n, eps, (v0, v1),
            scenario=f"morse-difference-omega{omega / math.pi:.4g}pi-d{d}-{label}-seed{seed}")
        rep.provenance.update({"seed": seed, "omega": omega, "pair": label,
                               "dim_v0": v0.shape[1], "dim_v1": v1.shape[1]})
        out.append(rep)
    return out


def run_batch(tasks: Sequence[Callable[[], IndexReport | list[IndexReport]]]
              ) -> list[IndexReport]:
    """Run scenario thunks data-parallel; flatten and sort by scenario id."""
    from .parallel import parallel_map

    results = parallel_map(lambda f: f(), tasks)
    flat: list[IndexReport] = []
    for r in results:
        flat.extend(r if isinstance(r, list) else [r])
    return sorted(flat, key=lambda r: r.scenario)
