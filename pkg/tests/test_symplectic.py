import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphindex.symplectic import (
    Inertia, LagrangianFrame, SymplecticError, conormal_lagrangian, direct_sum, dirichlet,
    doubled_form, gap_distance, graph_lagrangian, hormander_index, inertia, intersection_dim,
    is_symplectic, make_form, neumann, q_form, random_lagrangian, random_symplectic,
    reduction_space, standard_form, structured_lagrangians, symplectic_matrix_standard,
    symplectic_reduce, triple_index, triple_index_bound,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.sampled_from([1, 2, 3, 4])


def _quad(n, seed):
    rng = np.random.default_rng(seed)
    sp = standard_form(n)
    if seed % 2:
        return structured_lagrangians(sp, 4, rng)
    return [random_lagrangian(sp, rng) for _ in range(4)]


# -- forms ------------------------------------------------------------------

def test_single_block_is_standard():
    sp = make_form([(1, 1)])
    j = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.array_equal(sp.complex_structure, j)
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert sp.omega(x, y) == pytest.approx(j @ x @ y)


def test_doubled_form_signs():
    sp = make_form([(2, -1), (2, 1)])
    j = symplectic_matrix_standard(2)
    expected = np.block([[-j, np.zeros((4, 4))], [np.zeros((4, 4)), j]])
    assert np.array_equal(sp.complex_structure, expected)
    assert sp == doubled_form(2)


def test_star_space_dimension():
    sp = make_form([(2, 1)] * 3 + [(2, -1)])
    assert sp.dim == 16 and sp.n == 8


# -- Lagrangian constructors ------------------------------------------------

def test_conormal_extremes_are_dirichlet_and_neumann():
    sp = standard_form(2)
    ld = conormal_lagrangian(np.zeros((2, 0)), sp)
    ln = conormal_lagrangian(np.eye(2), sp)
    assert gap_distance(ld, dirichlet(sp)) < 1e-12
    assert gap_distance(ln, neumann(sp)) < 1e-12
    # Dirichlet data have vanishing q, so the frame spans the p coordinates
    assert np.allclose(ld.basis[2:], 0.0)


def test_conormal_of_diagonal_is_kirchhoff():
    m = 3
    w = np.ones((m, 1)) / np.sqrt(m)
    frame = conormal_lagrangian(w, standard_form(m))
    frame.assert_lagrangian()
    p, q = frame.basis[:m], frame.basis[m:]
    # q is continuous across the vertex and the momenta balance
    assert np.allclose(q - q.mean(axis=0), 0.0)
    assert np.allclose(p.sum(axis=0), 0.0)


def test_graph_of_identity_is_diagonal():
    frame = graph_lagrangian(np.eye(2))
    x = frame.basis
    assert np.allclose(x[:2], x[2:])


def test_graph_of_j():
    j = symplectic_matrix_standard(1)
    frame = graph_lagrangian(j)
    ref = np.array([[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, -1.0, 0.0]]).T
    assert gap_distance(frame.basis, ref) < 1e-12


def test_rotation_graph_transversal_to_diagonal():
    th = np.pi / 3
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    frame = graph_lagrangian(rot)
    frame.assert_lagrangian(1e-12)
    assert intersection_dim(frame, graph_lagrangian(np.eye(2))) == 0


def test_graph_of_non_symplectic_matrix_raises():
    with pytest.raises(SymplecticError):
        graph_lagrangian(np.diag([2.0, 1.0]))


def test_from_span_rejects_non_isotropic():
    sp = standard_form(1)
    with pytest.raises(SymplecticError):
        LagrangianFrame.from_span(sp, np.eye(2))


# -- intersections and gaps -------------------------------------------------

@pytest.mark.parametrize("n", [1, 3])
def test_intersection_dims(n):
    sp = standard_form(n)
    assert intersection_dim(dirichlet(sp), dirichlet(sp)) == n
    assert intersection_dim(dirichlet(sp), neumann(sp)) == 0


def test_gap_distance_examples():
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    assert gap_distance(e1, e1) == 0.0
    assert gap_distance(e1, e2) == pytest.approx(1.0)
    for th in (0.1, 1.0, 2.5):
        v = np.array([[np.cos(th)], [np.sin(th)]])
        assert gap_distance(e1, v) == pytest.approx(abs(np.sin(th)), abs=1e-14)


@given(dims, seeds)
def test_gap_distance_matches_projector_norm(n, seed):
    a, b = _quad(n, seed)[:2]
    ref = np.linalg.norm(a.basis @ a.basis.T - b.basis @ b.basis.T, 2)
    assert gap_distance(a, b) == pytest.approx(min(ref, 1.0), abs=1e-12)


# -- inertia ----------------------------------------------------------------

def test_inertia_examples():
    assert inertia(np.diag([2.0, -1.0, 0.0])).as_tuple() == (1, 1, 1)
    assert inertia(np.zeros((3, 3))).as_tuple() == (0, 0, 3)


def test_sylvester_law_on_random_congruences():
    rng = np.random.default_rng(7)
    d = np.diag([1.0, 1.0, -1.0])
    for _ in range(100):
        a = rng.standard_normal((3, 3))
        assert inertia(a.T @ d @ a).as_tuple() == (2, 1, 0)


def test_inertia_rejects_asymmetric():
    with pytest.raises(SymplecticError):
        inertia(np.array([[0.0, 1.0], [0.0, 0.0]]))


# -- Q form and triple index ------------------------------------------------

@given(dims, seeds)
def test_q_form_vanishes_when_gamma_equals_alpha(n, seed):
    a, b = _quad(n, seed)[:2]
    _, q = q_form(a, b, a)
    assert np.allclose(q, 0.0, atol=1e-12)


def test_q_form_on_graph_of_symmetric_matrix():
    sp = standard_form(2)
    s = np.array([[2.0, 0.5], [0.5, -1.0]])
    gamma = LagrangianFrame.from_span(sp, np.vstack([np.eye(2), s]))
    basis, q = q_form(dirichlet(sp), neumann(sp), gamma)
    # express the form in the p coordinates of L_D
    coords = basis[:2]
    form = np.linalg.solve(coords.T, np.linalg.solve(coords.T, q).T).T
    assert np.allclose(form, s, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_triple_index_alpha_beta_alpha(n):
    sp = standard_form(n)
    assert triple_index(dirichlet(sp), neumann(sp), dirichlet(sp)) == n


@pytest.mark.parametrize("angle", [-1e-6, 1e-6, -3e-6, 3e-6])
def test_nearly_intersecting_frames_are_counted_once(angle):
    # alpha is within the intersection tolerance of gamma = L_D, so the triple
    # index must snap to iota(L_D, L_N, L_D) = 1 for either rotation sign
    sp = standard_form(1)
    c, s = np.cos(angle), np.sin(angle)
    alpha = dirichlet(sp).transformed(np.array([[c, -s], [s, c]]))
    assert triple_index(alpha, neumann(sp), dirichlet(sp)) == 1
    beta = dirichlet(sp).transformed(np.array([[0.6, -0.8], [0.8, 0.6]]))
    assert hormander_index(alpha, beta, dirichlet(sp), neumann(sp)) == \
        -hormander_index(alpha, beta, neumann(sp), dirichlet(sp))


@given(dims, seeds)
def test_circular_permutation(n, seed):
    a, b, c, _ = _quad(n, seed)
    lhs = triple_index(a, b, c) - triple_index(b, c, a)
    assert lhs == intersection_dim(a, c) - intersection_dim(b, a)


@given(dims, seeds)
def test_q_inertia_cyclicity(n, seed):
    a, b, c, _ = _quad(n, seed)

    def idx(x, y, z, neg=False):
        ine = inertia(q_form(x, y, z)[1], atol=1e-9)
        return ine.n_minus if neg else ine.n_plus

    value = idx(a, b, c)
    assert idx(b, c, a) == value
    assert idx(c, a, b) == value
    assert idx(b, a, c, neg=True) == value


@given(dims, seeds)
def test_triple_index_bounds(n, seed):
    a, b, c, _ = _quad(n, seed)
    t = triple_index(a, b, c)
    assert 0 <= t <= triple_index_bound(a, b, c) <= n


@given(dims, seeds)
def test_hormander_antisymmetry(n, seed):
    a, b, c, d = _quad(n, seed)
    assert hormander_index(a, b, c, d) == -hormander_index(a, b, d, c)
    assert hormander_index(a, b, c, c) == 0


@given(dims, seeds)
def test_hormander_endpoint_identity(n, seed):
    rng = np.random.default_rng(seed)
    sp = standard_form(n)
    la = random_lagrangian(sp, rng)
    lb = la.transformed(random_symplectic(n, rng))
    mu = random_lagrangian(sp, rng)
    value = hormander_index(la, lb, lb, mu)
    assert value == triple_index(la, lb, mu) >= 0


@given(dims, seeds)
def test_triple_index_symplectic_invariance(n, seed):
    rng = np.random.default_rng(seed)
    a, b, c, _ = _quad(n, seed)
    s = random_symplectic(n, rng)
    assert is_symplectic(s)
    moved = [x.transformed(s) for x in (a, b, c)]
    assert triple_index(*moved) == triple_index(a, b, c)


# -- reduction ----------------------------------------------------------------

def test_trivial_reduction_keeps_frame():
    rng = np.random.default_rng(3)
    sp = standard_form(2)
    frame = random_lagrangian(sp, rng)
    red = symplectic_reduce(frame, np.zeros((4, 0)))
    assert gap_distance(red, frame) < 1e-12


def test_reduction_of_dirichlet_pair_by_diagonal():
    sp = doubled_form(1)
    ld = direct_sum(dirichlet(standard_form(1)), dirichlet(standard_form(1)))
    ld = LagrangianFrame(sp, ld.basis)
    # the q-diagonal is isotropic for -omega + omega
    eps = np.array([[0.0, 1.0, 0.0, 1.0]]).T / np.sqrt(2)
    red = reduction_space(sp, eps)
    out = symplectic_reduce(ld, red)
    assert out.dim == 1
    # the reduced frame meets the image of p-data, which is Dirichlet there
    p_image = red.coordinates(np.array([[1.0, 0.0, 1.0, 0.0]]).T / np.sqrt(2))
    assert gap_distance(out.basis, p_image / np.linalg.norm(p_image)) < 1e-10


def test_reduction_rejects_non_isotropic():
    sp = standard_form(1)
    with pytest.raises(SymplecticError):
        reduction_space(sp, np.eye(2))


def test_inertia_dataclass_signature():
    assert Inertia(2, 1, 0).signature == 1
