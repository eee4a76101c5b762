import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphindex.graph import leaf_with_half_line, segment, star_graph
from graphindex.hamiltonian import (
    Constant, EdgeCoefficients, Exponential, HamiltonianError, NonHyperbolicError,
    SLCoefficients, cauchy_data_lagrangian, conjugate_instants, flow_sweep, monodromy,
    random_coefficients, stable_subspace, sweep_table, to_hamiltonian,
)
from graphindex.symplectic import gap_distance, graph_lagrangian, symplectic_residual

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def harmonic(d, omega, length=1.0):
    g = segment(length, d)
    return g, SLCoefficients.uniform(g, R=-omega * omega)


def test_hamiltonian_of_harmonic_oscillator():
    g, c = harmonic(2, 3.0)
    b = to_hamiltonian(c, 0, 0.3)
    expected = np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), 9.0 * np.eye(2)]])
    assert np.allclose(b, expected)


def test_hamiltonian_rejects_singular_p():
    g = segment()
    c = SLCoefficients(1, {0: EdgeCoefficients.constant(1, P=0.0)})
    with pytest.raises(HamiltonianError):
        to_hamiltonian(c, 0, 0.5)


@pytest.mark.parametrize("method", ["dop853", "magnus"])
def test_free_flow_is_a_shear(method):
    g = segment()
    c = SLCoefficients.uniform(g, P=1.0)
    m = monodromy(c, 0, 1.0, method=method).matrix
    assert np.allclose(m, [[1.0, 0.0], [1.0, 1.0]], atol=1e-10)


@pytest.mark.parametrize("method", ["dop853", "magnus"])
def test_harmonic_monodromy_closed_form(method):
    w = 2.5 * math.pi
    g, c = harmonic(1, w)
    m = monodromy(c, 0, 0.7, method=method).matrix
    # q'' = -w^2 q with p = q'
    expected = np.array([[math.cos(0.7 * w), -w * math.sin(0.7 * w)],
                         [math.sin(0.7 * w) / w, math.cos(0.7 * w)]])
    assert np.allclose(m, expected, atol=1e-9)


@given(seeds)
def test_monodromy_cocycle_and_symplecticity(seed):
    rng = np.random.default_rng(seed)
    g = segment(2.0, 2)
    c = random_coefficients(g, rng)
    s1, s2 = sorted(rng.uniform(0.1, 2.0, size=2))
    m1 = monodromy(c, 0, s1).matrix
    m2 = monodromy(c, 0, s2).matrix
    m12 = monodromy(c, 0, s2, start=s1).matrix
    assert np.allclose(m2, m12 @ m1, atol=1e-8)
    assert symplectic_residual(m2) <= 1e-9


@given(seeds)
def test_magnus_agrees_with_dop853(seed):
    rng = np.random.default_rng(seed)
    g = segment(1.5, 2)
    c = random_coefficients(g, rng)
    a = monodromy(c, 0, 1.5, method="magnus").matrix
    b = monodromy(c, 0, 1.5, method="dop853").matrix
    assert np.allclose(a, b, atol=1e-7)
    assert symplectic_residual(a) <= 1e-9


def test_unknown_method_raises():
    g, c = harmonic(1, 1.0)
    with pytest.raises(ValueError):
        monodromy(c, 0, 1.0, method="euler")


def test_stable_line_of_decaying_exponential():
    kappa = 1.7
    g = leaf_with_half_line()
    c = SLCoefficients.uniform(g, R=kappa ** 2)
    w = stable_subspace(c, 1, 1.0)
    ref = np.array([[-kappa], [1.0]]) / math.hypot(kappa, 1.0)
    assert gap_distance(w.basis, ref) < 1e-10


def test_repeller_plane_is_lagrangian():
    g = leaf_with_half_line(d=2)
    c = SLCoefficients.uniform(g, R=np.diag([1.0, 4.0]))
    w = stable_subspace(c, 1, 1.0)
    assert w.dim == 2
    assert w.isotropy_residual() <= 1e-10


def test_stable_space_with_exponential_tail():
    kappa = 2.0
    g = leaf_with_half_line()
    ec = EdgeCoefficients(1, Constant(np.eye(1)), Constant(np.zeros((1, 1))),
                          Exponential(kappa ** 2 * np.eye(1), -np.eye(1), 3.0, t0=1.0),
                          Constant(np.zeros((1, 1))))
    c = SLCoefficients(1, {0: EdgeCoefficients.constant(1), 1: ec})
    w = stable_subspace(c, 1, 1.0)
    w.assert_lagrangian(1e-10)
    # the potential dip makes decay slower than kappa at the junction
    slope = w.basis[0, 0] / w.basis[1, 0]
    assert -kappa < slope < 0.0


def test_non_hyperbolic_limit_raises():
    g = leaf_with_half_line()
    c = SLCoefficients.uniform(g)
    with pytest.raises(NonHyperbolicError, match="essential spectrum at 0"):
        stable_subspace(c, 1, 1.0)


def test_cauchy_data_of_free_segment():
    g = segment()
    c = SLCoefficients.uniform(g, P=1.0)
    lam = cauchy_data_lagrangian(g, c)
    m = monodromy(c, 0, 1.0).matrix
    assert gap_distance(lam, graph_lagrangian(m)) < 1e-10


def test_cauchy_data_of_half_line_graph():
    g = leaf_with_half_line()
    c = SLCoefficients.uniform(g, R=4.0)
    lam = cauchy_data_lagrangian(g, c)
    lam.assert_lagrangian(1e-8)
    assert lam.dim == 3


@pytest.mark.parametrize("d", [1, 2])
def test_conjugate_instants_of_harmonic_segment(d):
    g, c = harmonic(d, 2.5 * math.pi)
    inst = conjugate_instants(c, 0, 0.0, 1.0)
    assert [t for t, _ in inst] == pytest.approx([0.4, 0.8], abs=1e-6)
    assert [k for _, k in inst] == [d, d]


def test_convex_potential_has_no_conjugate_instants():
    g = segment(3.0)
    c = SLCoefficients.uniform(g, R=4.0)
    assert conjugate_instants(c, 0, 0.0, 3.0) == []


def test_sweep_table_changes_sign_at_conjugate_points():
    g, c = harmonic(1, 2.5 * math.pi)
    rows = sweep_table(flow_sweep(c[0], 0.0, 1.0), n=101)
    dets = np.array([r[1] for r in rows[1:]])
    assert int(np.sum(np.diff(np.sign(dets)) != 0)) == 2


def test_random_coefficients_are_legendre_convex():
    rng = np.random.default_rng(4)
    g = star_graph(3, d=3)
    c = random_coefficients(g, rng)
    ts = np.linspace(0.0, 1.0, 11)
    for e in g.edges:
        assert c[e.id].check(ts) == []


def test_coefficients_from_document():
    g = segment()
    ec = EdgeCoefficients.from_json({"kind": "polynomial", "R": [1.0, 2.0]}, 1)
    assert ec.R(np.array(0.5)) == pytest.approx(2.0)
    ec = EdgeCoefficients.from_json({"kind": "table", "t": [0, 1], "R": [0.0, 4.0]}, 1)
    assert ec.R(np.array(0.25)) == pytest.approx(1.0)
    ec = EdgeCoefficients.from_json(
        {"kind": "fourier", "R": {"const": 1.0, "cos": [2.0]}, "omega": math.pi}, 1)
    assert ec.R(np.array(1.0)) == pytest.approx(-1.0)
    assert g.m == 1
