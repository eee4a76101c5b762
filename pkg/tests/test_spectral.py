import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphindex.graph import (
    conditions_to_lagrangian, dirichlet_lagrangian, leaf_with_half_line, segment, star_graph,
)
from graphindex.hamiltonian import SLCoefficients
from graphindex.spectral import (
    OperatorFamily, SpectralError, assemble, count_below, eigenvalues, morse_index,
    segment_dirichlet_operator, spectral_flow,
)

PI2 = math.pi ** 2


def test_dirichlet_laplacian_spectrum():
    ev = eigenvalues(segment_dirichlet_operator(mesh_n=256), k=3)
    assert ev == pytest.approx([PI2, 4 * PI2, 9 * PI2], rel=2e-3)


def test_smallest_eigenvalue_at_fine_mesh():
    ev = eigenvalues(segment_dirichlet_operator(mesh_n=256), k=1)
    assert ev[0] == pytest.approx(PI2, rel=1e-3)


def test_fiber_dimension_doubles_multiplicities():
    ev = eigenvalues(segment_dirichlet_operator(d=2, mesh_n=64), k=4)
    assert ev == pytest.approx([PI2, PI2, 4 * PI2, 4 * PI2], rel=1e-6)


def test_equilateral_star_matches_secular_equation():
    # u_j = A_j sin(k (1 - x)): either cos k = 0 with equal A_j, or sin k = 0 with sum A_j = 0
    g = star_graph(3)
    op = assemble(g, SLCoefficients.uniform(g), conditions_to_lagrangian(g), 64)
    ev = eigenvalues(op, k=4)
    assert ev / (PI2 / 4) == pytest.approx([1.0, 4.0, 4.0, 9.0], rel=1e-6)


def test_shift_identity():
    g = segment()
    lam = dirichlet_lagrangian(g)
    base = assemble(g, SLCoefficients.uniform(g), lam, 32)
    shifted = assemble(g, SLCoefficients.uniform(g, R=3.5), lam, 32)
    assert eigenvalues(shifted, 5) - eigenvalues(base, 5) == pytest.approx([3.5] * 5, abs=1e-9)


@pytest.mark.parametrize("d, expected", [(1, 2), (2, 4)])
def test_morse_index_of_harmonic_segment(d, expected):
    res = morse_index(segment_dirichlet_operator(2.5 * math.pi, d=d))
    assert res.index == expected
    assert not res.indeterminate
    assert res.indices[-1] == res.indices[-2]


def test_nonnegative_potential_has_zero_index():
    g = star_graph(3, d=2)
    c = SLCoefficients.uniform(g, R=2.0)
    assert morse_index(assemble(g, c, conditions_to_lagrangian(g))).index == 0


def test_kernel_is_flagged_not_counted():
    res = morse_index(segment_dirichlet_operator(2.0 * math.pi), eps=1e-6)
    assert res.index == 1
    assert res.indeterminate


def test_count_below_matches_dense_and_banded():
    op = segment_dirichlet_operator(3.7 * math.pi, mesh_n=400)
    assert op.size > 600
    ev = eigenvalues(op, k=6)
    assert count_below(op, 0.0) == int(np.sum(ev < 0.0)) == 3


def test_half_line_operator_is_stable_in_horizon():
    g = leaf_with_half_line()
    c = SLCoefficients.uniform(g, R=4.0)
    op = assemble(g, c, conditions_to_lagrangian(g), 32)
    assert morse_index(op).index == 0


def test_constant_family_has_zero_flow():
    op = segment_dirichlet_operator(2.5 * math.pi)
    res = spectral_flow(lambda s: op, n_grid=5)
    assert res.value == 0 and res.crossings == ()


def _harmonic_family(c_strength):
    g = segment()
    c = SLCoefficients.uniform(g, R=-(2.5 * math.pi) ** 2, C=c_strength)
    return OperatorFamily(g, c, dirichlet_lagrangian(g), 32)


@pytest.mark.parametrize("c_strength", [5.0, 30.0, 70.0])
def test_rising_shift_flow_matches_closed_form(c_strength):
    # eigenvalues (k^2 - 6.25) pi^2 + s c leave the negative axis when c exceeds the gap
    gaps = [(6.25 - k * k) * PI2 for k in (1, 2)]
    expected = sum(c_strength > gap for gap in gaps)
    res = spectral_flow(_harmonic_family(c_strength))
    assert res.value == expected
    for s, jump in res.crossings:
        k_cross = [k for k in (1, 2) if abs(s * c_strength - (6.25 - k * k) * PI2) < 0.5]
        assert k_cross and jump == 1


@given(st.floats(min_value=-80.0, max_value=80.0), st.floats(min_value=0.2, max_value=0.8))
def test_flow_path_additivity(c_strength, mid):
    fam = _harmonic_family(c_strength)
    whole = spectral_flow(fam, n_grid=9).value
    parts = spectral_flow(fam, (0.0, mid), n_grid=9).value + \
        spectral_flow(fam, (mid, 1.0), n_grid=9).value
    assert whole == parts
