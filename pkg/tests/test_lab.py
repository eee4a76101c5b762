import json
import math

import numpy as np
import pytest

from graphindex.graph import (
    conditions_to_lagrangian, segment, star_graph, with_conditions,
)
from graphindex.hamiltonian import EdgeCoefficients, SLCoefficients
from graphindex.lab import (
    CONVENTIONS, SCHEMA_VERSION, Identity, IndexReport, QuadraticDensity,
    euler_lagrange_residual, merge_reports, run_batch, segment_coefficients,
    verify_morse_difference, verify_morse_index_theorem, verify_segment_morse_theorem,
    verify_spectral_flow_formula, verify_star_formula, verify_two_star_formula,
)


def test_identity_lines():
    assert Identity("iMor - mu_CLM", -3, -3).line() == "iMor - mu_CLM = -3 (expected -3) PASS"
    assert Identity("a = b", 1, 2).line() == "a = b: 1 vs 2 FAIL"
    ident = Identity("x", 0, 1, "indeterminate")
    assert not ident.passed and ident.line().endswith("INDETERMINATE")


def test_report_document_shape():
    rep = IndexReport("demo")
    rep.add("x", 1, 1)
    rep.quantities["value"] = 1.0 / 3.0
    doc = json.loads(rep.to_json())
    assert doc["schema"] == SCHEMA_VERSION == 1
    assert doc["conventions"] == CONVENTIONS
    assert doc["passed"] is True
    assert doc["quantities"]["value"] == 0.333333333333
    assert rep.lines() == ["[demo] x = 1 (expected 1) PASS"]


def test_report_failure_flags():
    rep = IndexReport("demo")
    rep.add("x", 1, 2)
    assert rep.failed and not rep.passed


def test_merge_is_sorted():
    reps = [IndexReport(name) for name in ("b", "a", "c")]
    doc = merge_reports(reps)
    assert [r["scenario"] for r in doc["reports"]] == ["a", "b", "c"]
    assert doc["schema"] == 1


def test_json_is_reproducible():
    first = verify_two_star_formula(1, 1, 1, seed=3).to_json()
    second = verify_two_star_formula(1, 1, 1, seed=3).to_json()
    assert first == second


def test_run_batch_flattens_and_sorts():
    reps = run_batch([lambda: IndexReport("z"), lambda: [IndexReport("y"), IndexReport("x")]])
    assert [r.scenario for r in reps] == ["x", "y", "z"]


def test_morse_theorem_on_harmonic_segment():
    g, c = segment_coefficients(2.5 * math.pi, 1)
    rep = verify_morse_index_theorem(g, c)
    ident = rep.identities[0]
    assert (ident.lhs, ident.rhs, ident.status) == (2, 2, "pass")


def test_morse_theorem_with_nonnegative_potential():
    g = star_graph(3, d=2)
    rep = verify_morse_index_theorem(g, SLCoefficients.uniform(g, R=1.0))
    assert rep.identities[0].lhs == rep.identities[0].rhs == 0


def test_morse_theorem_on_decoupled_edges():
    # a Dirichlet centre decouples the edges, so the index is a sum over edges
    lengths = [1.0, 1.3, 0.8]
    omegas = [2.5 * math.pi, 1.2 * math.pi, 3.3 * math.pi]
    g = with_conditions(star_graph(3, lengths), {"c": "dirichlet"})
    c = SLCoefficients(1, {j: EdgeCoefficients.constant(1, R=-w * w)
                           for j, w in enumerate(omegas)})
    rep = verify_morse_index_theorem(g, c)
    expected = sum(math.floor(w * L / math.pi) for w, L in zip(omegas, lengths))
    assert rep.identities[0].lhs == rep.identities[0].rhs == expected


def test_segment_instants_close_to_closed_form():
    rep = verify_segment_morse_theorem(3.7 * math.pi, d=2)
    assert rep.passed
    assert rep.quantities["max_instant_deviation"] <= 1e-6


def test_constant_family_spectral_flow():
    g, c = segment_coefficients(1.3 * math.pi, 1)
    rep = verify_spectral_flow_formula(g, c)
    assert (rep.identities[0].lhs, rep.identities[0].rhs) == (0, 0)


def test_morse_difference_with_equal_conditions():
    g, c = segment_coefficients(0.7 * math.pi, 1)
    lam = conditions_to_lagrangian(g)
    rep = verify_morse_difference(g, c, lam, lam)
    assert rep.passed
    assert all(i.lhs == 0 for i in rep.identities)


def test_star_chain_matches_computed_defect():
    rep = verify_star_formula(3, 1, seed=0)
    q = rep.quantities
    assert q["iota(graph(I), lambda0, dirichlet)"] == 1
    assert q["morse_index_lambda0"] - q["mu_clm_lambda0"] == -2
    chain = [i for i in rep.identities if i.name != "iMor - mu_CLM"]
    assert all(i.passed for i in chain)


def test_two_star_segment_case():
    rep = verify_two_star_formula(1, 1, 1, seed=0)
    assert rep.passed
    assert rep.identity("iMor - mu_CLM").lhs == -1


def _harmonic_density(omega):
    g = segment()
    return g, QuadraticDensity(SLCoefficients.uniform(g, R=-omega * omega))


def test_geodesic_line_is_extremal():
    g = segment()
    dens = QuadraticDensity(SLCoefficients.uniform(g))
    x = {0: lambda t: (t, 1.0, 0.0)}
    res = euler_lagrange_residual(g, dens, x, offset=np.array([0.0, 1.0]),
                                  w=np.zeros((2, 0)))
    assert res == pytest.approx(0.0, abs=1e-14)


def test_harmonic_sine_is_extremal():
    w = 2.5
    g, dens = _harmonic_density(w)
    x = {0: lambda t: (math.sin(w * t), w * math.cos(w * t), -w * w * math.sin(w * t))}
    res = euler_lagrange_residual(g, dens, x, offset=np.array([0.0, math.sin(w)]),
                                  w=np.zeros((2, 0)))
    assert res <= 1e-8


def test_residual_grows_linearly_with_perturbation():
    w = 2.5
    g, dens = _harmonic_density(w)

    def cand(delta):
        def f(t):
            b, db, ddb = t * (1 - t), 1 - 2 * t, -2.0
            return (math.sin(w * t) + delta * b, w * math.cos(w * t) + delta * db,
                    -w * w * math.sin(w * t) + delta * ddb)
        return {0: f}

    off = np.array([0.0, math.sin(w)])
    r1 = euler_lagrange_residual(g, dens, cand(1e-3), offset=off, w=np.zeros((2, 0)))
    r2 = euler_lagrange_residual(g, dens, cand(2e-3), offset=off, w=np.zeros((2, 0)))
    assert r1 > 0
    assert r2 / r1 == pytest.approx(2.0, rel=1e-6)
