"""Acceptance suite: one test per criterion, each recording a summary line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear in
the "acceptance criteria" section at the end of the run.
"""

import math
import time

import numpy as np
import pytest

from graphindex import nls
from graphindex.hamiltonian import monodromy, random_coefficients
from graphindex.graph import segment
from graphindex.lab import (
    sf_family, verify_reduction, verify_segment_morse_difference,
    verify_segment_morse_theorem, verify_segment_recovery, verify_spectral_flow_formula,
    verify_star_formula, verify_two_star_formula,
)
from graphindex.maslov import clm_index
from graphindex.spectral import eigenvalues, segment_dirichlet_operator
from graphindex.symplectic import (
    SymplecticError, hormander_index, inertia, intersection_dim, q_form, random_lagrangian,
    random_symplectic, standard_form, structured_lagrangians, symplectic_residual,
    triple_index, triple_index_bound,
)
from pathgen import random_piecewise_path

SEEDS = (0, 1, 2)
# monodromy residuals from every run, checked by criterion 10
RESIDUALS: list[float] = []


def _failures(reports):
    return [line for r in reports for line in r.lines() if line.endswith("FAIL")]


def test_criterion_01_star_formula(record_criterion):
    start = time.perf_counter()
    reports = [verify_star_formula(m, d, seed=seed)
               for m in (2, 3, 5) for d in (1, 2, 3) for seed in SEEDS]
    RESIDUALS.extend(r.quantities["max_symplectic_residual"] for r in reports)
    primary = [r.identity("iMor - mu_CLM") for r in reports]
    bad = sorted({(r.provenance["edges"], r.provenance["fiber_dim"])
                  for r, i in zip(reports, primary) if not i.passed})
    ok = not bad
    detail = (f"iMor - mu = -m(d-1) on {len(reports)} stars; "
              f"mismatched (m, d): {bad if bad else 'none'}")
    record_criterion(1, ok, detail, time.perf_counter() - start)
    assert ok, "\n".join(_failures(reports))


def test_criterion_02_two_star_formula(record_criterion):
    start = time.perf_counter()
    cases = {(1, 1, 1): -1, (1, 1, 3): -3, (3, 4, 1): -6, (2, 2, 2): -6}
    reports, diffs = [], []
    for (ma, mb, d), expected in cases.items():
        rep = verify_two_star_formula(ma, mb, d, seed=0)
        reports.append(rep)
        diffs.append((rep.quantities["difference"], expected,
                      rep.identity("iota(graph(I), L0, LD) = 2d").passed))
    RESIDUALS.extend(r.quantities["max_symplectic_residual"] for r in reports)
    ok = all(r.passed for r in reports) and all(a == b and t for a, b, t in diffs)
    record_criterion(2, ok, f"differences {[a for a, _, _ in diffs]} expected "
                            f"{list(cases.values())}; triple index 2d", time.perf_counter() - start)
    assert ok, "\n".join(_failures(reports))


def test_criterion_03_segment_recovery(record_criterion):
    start = time.perf_counter()
    reports = [verify_segment_recovery(d, seed) for d in (1, 2, 3) for seed in (None, 0)]
    RESIDUALS.extend(r.quantities["max_symplectic_residual"] for r in reports)
    ok = all(r.passed for r in reports)
    record_criterion(3, ok, f"two_star(1,1,d) = segment = -d on {len(reports)} cases",
                     time.perf_counter() - start)
    assert ok, "\n".join(_failures(reports))


def test_criterion_04_morse_index_theorem(record_criterion):
    start = time.perf_counter()
    reports = [verify_segment_morse_theorem(k * math.pi, d)
               for d in (1, 2) for k in (1.3, 2.5, 3.7)]
    dev = max(r.quantities["max_instant_deviation"] for r in reports)
    values = [r.quantities["morse_index_dirichlet"] for r in reports]
    ok = all(r.passed for r in reports) and dev <= 1e-6
    record_criterion(4, ok, f"iMor {values}; max instant deviation {dev:.1e}",
                     time.perf_counter() - start)
    assert ok, "\n".join(_failures(reports))


def test_criterion_05_spectral_flow_formula(record_criterion):
    start = time.perf_counter()
    reports = []
    for kind in ("segment", "star3"):
        for c in (5.0, 30.0, 70.0):
            for seed in SEEDS:
                g, coeffs = sf_family(kind, c, seed)
                reports.append(verify_spectral_flow_formula(
                    g, coeffs, seed=seed, scenario=f"sf-{kind}-c{c:g}-seed{seed}"))
    flows = sorted({r.quantities["spectral_flow"] for r in reports})
    ok = all(r.passed for r in reports)
    record_criterion(5, ok, f"sf = -mu on {len(reports)} families; sf values seen {flows}",
                     time.perf_counter() - start)
    assert ok, "\n".join(_failures(reports))


def _quadruple(n, rng, structured):
    sp = standard_form(n)
    if structured:
        return structured_lagrangians(sp, 4, rng)
    return [random_lagrangian(sp, rng) for _ in range(4)]


def _symplectic_violations(a, b, c, d, n):
    out = []
    if (triple_index(a, b, c) - triple_index(b, c, a)
            != intersection_dim(a, c) - intersection_dim(b, a)):
        out.append("circular permutation")
    plus = [inertia(q_form(x, y, z)[1], atol=1e-9).n_plus
            for x, y, z in ((a, b, c), (b, c, a), (c, a, b))]
    minus = inertia(q_form(b, a, c)[1], atol=1e-9).n_minus
    if len(set(plus + [minus])) != 1:
        out.append("Q inertia cyclicity")
    t = triple_index(a, b, c)
    if not 0 <= t <= triple_index_bound(a, b, c) <= n:
        out.append("triple index bound")
    try:
        if hormander_index(a, b, c, d) != -hormander_index(a, b, d, c):
            out.append("Hormander antisymmetry")
    except SymplecticError:
        out.append("Hormander expressions disagree")
    return out


def test_criterion_06_symplectic_identities(record_criterion):
    start = time.perf_counter()
    violations = {}
    count = 0
    for n in (1, 2, 4, 6):
        rng = np.random.default_rng([6, n])
        for k in range(1000):
            quad = _quadruple(n, rng, structured=k % 4 == 3)
            for v in _symplectic_violations(*quad, n):
                violations[(n, v)] = violations.get((n, v), 0) + 1
            count += 1
    ok = not violations
    record_criterion(6, ok, f"{count} quadruples over 2n in (2, 4, 8, 12); "
                            f"violations {violations or 0}", time.perf_counter() - start)
    assert ok, violations


def test_criterion_07_clm_axioms(record_criterion):
    start = time.perf_counter()
    violations = []
    for k in range(200):
        n = 1 + k % 4
        rng = np.random.default_rng([7, k])
        sp = standard_form(n)
        p1, p2 = random_piecewise_path(sp, rng), random_piecewise_path(sp, rng)
        value = clm_index((p1, p2))
        cut = float(rng.uniform(0.3, 0.7))
        parts = (clm_index((p1.restricted(0.0, cut), p2.restricted(0.0, cut)))
                 + clm_index((p1.restricted(cut, 1.0), p2.restricted(cut, 1.0))))
        if parts != value:
            violations.append((k, "additivity"))
        s = random_symplectic(n, rng)
        if clm_index((p1.transformed(s), p2.transformed(s))) != value:
            violations.append((k, "symplectic invariance"))
        sym = rng.standard_normal((2 * n, 2 * n))
        sym = 0.5 * (sym + sym.T)
        if clm_index((p1.refined(2), p2.nudged(sym / np.linalg.norm(sym, 2), 0.05))) != value:
            violations.append((k, "refinement and deformation"))
    ok = not violations
    record_criterion(7, ok, f"200 path pairs, 2n <= 8; violations {violations or 0}",
                     time.perf_counter() - start)
    assert ok, violations


def test_criterion_08_morse_difference(record_criterion):
    start = time.perf_counter()
    reports = [r for d in (1, 2) for k in (0.3, 0.7, 1.2)
               for r in verify_segment_morse_difference(k * math.pi, d, seed=0)]
    remark = [r for r in reports
              if any(i.name.startswith("iota(L1, L0, LD) = dim") for i in r.identities)]
    ok = all(r.passed for r in reports) and len(remark) == len(reports)
    record_criterion(8, ok, f"{len(reports)} boundary-condition pairs, both identities "
                            f"and the conormal dimension count", time.perf_counter() - start)
    assert ok, "\n".join(_failures(reports))


def test_criterion_09_reduction(record_criterion):
    start = time.perf_counter()
    reports = [verify_reduction(1, seed) for seed in SEEDS]
    values = [(r.quantities["mu_full"], r.quantities["mu_reduced"]) for r in reports]
    ok = all(r.identity("-mu(full) = -mu(reduced)").passed for r in reports)
    others = _failures(reports)
    record_criterion(9, ok, f"(mu full, mu reduced) {values}", time.perf_counter() - start)
    assert ok and not others, "\n".join(others)


def test_criterion_10_numerical_hygiene(record_criterion):
    start = time.perf_counter()
    residuals = list(RESIDUALS)
    rng = np.random.default_rng(10)
    for d in (1, 2, 3):
        g = segment(1.7, d)
        c = random_coefficients(g, rng)
        for method in ("magnus", "dop853"):
            residuals.append(monodromy(c, 0, 1.7, method=method).residual)
    worst = max(residuals)
    ev = eigenvalues(segment_dirichlet_operator(mesh_n=256), k=3)
    exact = np.array([1.0, 4.0, 9.0]) * math.pi ** 2
    rel = float(np.max(np.abs(ev - exact) / exact))
    ok = worst <= 1e-9 and rel <= 2e-3
    record_criterion(10, ok, f"max symplectic residual {worst:.1e} over {len(residuals)} "
                             f"runs; Dirichlet spectrum rel error {rel:.1e}",
                     time.perf_counter() - start)
    assert ok


def test_criterion_11_nls(record_criterion):
    start = time.perf_counter()
    prof = nls.soliton_profile(4.0, 1.0, 20.0)
    mesh = nls.graph_mesh(nls.line_graph(), 20.0)
    flow = nls.normalized_gradient_flow(mesh, 1.0, 4.0)
    err = nls.l2_error(flow.field, prof)
    idx = nls.standing_wave_morse_index(flow.field, flow.omega, 4.0)
    res = prof.residual()
    ok = res <= 1e-6 and flow.converged and err <= 1e-3 and idx.unconstrained == 1
    record_criterion(11, ok, f"profile residual {res:.1e}; flow L2 error {err:.1e}; "
                             f"Morse index {idx.unconstrained}", time.perf_counter() - start)
    assert ok
