import json
import math
from pathlib import Path

import numpy as np
import pytest

from graphindex.graph import (
    GraphValidationError, boundary_space, build_graph, conditions_to_lagrangian,
    configuration_subspace, dirichlet_lagrangian, document_schema_path, leaf_with_half_line,
    load_graph, load_schema, neumann_lagrangian, segment, split_lagrangian, star_graph, trace,
    two_star, validate_document, with_conditions,
)
from graphindex.hamiltonian import SLCoefficients
from graphindex.symplectic import gap_distance, graph_lagrangian, intersection_dim

ROOT = Path(__file__).resolve().parents[1]
EXAMPLES = ROOT / "docs" / "examples"


def identity_graph(g):
    """``Graph(I)`` in the boundary space of a compact graph: a-data equal b-data."""
    n = g.n_a
    assert n == g.n_b
    return graph_lagrangian(np.eye(2 * n))


def test_packaged_schema_matches_docs_copy():
    docs = json.loads((ROOT / "docs" / "graph.schema.json").read_text())
    assert docs == load_schema()
    assert Path(document_schema_path()).is_file()


def test_segment_boundary_space():
    g = segment()
    sp = boundary_space(g)
    assert sp.dim == 4
    assert sp.blocks == ((1, -1), (1, 1))


def test_star_boundary_blocks():
    g = star_graph(3, d=2)
    assert (g.n_a, g.n_b) == (6, 6)
    assert g.degree("c") == 3


def test_star_of_five_leaves():
    g = star_graph(5)
    assert g.m == 5 and g.degree("c") == 5
    assert all(g.degree(f"l{j}") == 1 for j in range(1, 6))


def test_star_with_one_leaf_is_a_segment():
    g = star_graph(1)
    assert g.m == 1
    lam = conditions_to_lagrangian(g)
    # degree-one Kirchhoff is Neumann at the centre end
    ref = conditions_to_lagrangian(segment(left="neumann"))
    assert gap_distance(lam, ref) < 1e-12


def test_two_star_shape():
    g = two_star(3, 4)
    assert g.m == 8
    assert g.degree("A") == 4 and g.degree("B") == 5
    e = g.edge_map[3]
    assert (e.tail, e.head) == ("A", "B")


def test_half_line_counts_only_finite_endpoints():
    g = leaf_with_half_line(d=1)
    assert (g.n_a, g.n_b) == (2, 1)
    assert not g.compact


def test_zero_function_has_zero_trace():
    g = segment()
    tr = trace(g, {0: lambda t: (0.0, 0.0)}, SLCoefficients.uniform(g))
    assert np.array_equal(tr.vector, np.zeros(4))


def test_sine_trace():
    g = segment()
    f = {0: lambda t: (math.sin(math.pi * t), math.pi * math.cos(math.pi * t))}
    tr = trace(g, f, SLCoefficients.uniform(g))
    assert tr.vector == pytest.approx([math.pi, 0.0, -math.pi, 0.0], abs=1e-14)


def test_dirichlet_segment_lagrangian():
    g = segment()
    lam = conditions_to_lagrangian(g)
    assert gap_distance(lam, dirichlet_lagrangian(g)) < 1e-14
    # all q rows vanish
    assert np.allclose(lam.basis[[1, 3]], 0.0)


def test_star_kirchhoff_dimensions():
    m, d = 3, 2
    g = star_graph(m, d=d)
    w = configuration_subspace(g)
    assert w.shape[1] == d
    lam0 = conditions_to_lagrangian(g)
    assert intersection_dim(lam0, dirichlet_lagrangian(g)) == 2 * m * d - d
    assert intersection_dim(lam0, neumann_lagrangian(g)) == d


def test_two_star_identity_intersection():
    g = two_star(2, 2)
    lam0 = conditions_to_lagrangian(g)
    assert intersection_dim(identity_graph(g), lam0) == 3


def test_split_lagrangian_recovers_conormal():
    g = star_graph(3)
    u, s = split_lagrangian(g, conditions_to_lagrangian(g))
    assert u.shape[1] == 1
    assert np.allclose(s, 0.0)


def test_with_conditions_replaces_vertex():
    g = with_conditions(segment(), {"R": "neumann"})
    assert g.conditions["R"].kind == "neumann"
    assert g.conditions["L"].kind == "dirichlet"


def test_missing_condition_defaults_to_kirchhoff():
    doc = {"fiber_dim": 1, "vertices": [{"id": "x"}, {"id": "y"}],
           "edges": [{"id": 0, "tail": "x", "head": "y",
                      "interval": {"kind": "bounded", "a": 0, "b": 1}}]}
    g = build_graph(doc)
    assert g.conditions["x"].kind == "kirchhoff"


def test_document_round_trip():
    g = two_star(2, 3, d=2)
    again = build_graph(g.to_document())
    assert again.edges == g.edges
    assert gap_distance(conditions_to_lagrangian(again), conditions_to_lagrangian(g)) < 1e-14


def test_infinity_vertex_of_degree_two_is_rejected():
    doc = json.loads((EXAMPLES / "bad_infinity_degree.json").read_text())
    problems = validate_document(doc)
    assert any("degree 2 (must be 1)" in p for p in problems)
    with pytest.raises(GraphValidationError):
        build_graph(doc)


@pytest.mark.parametrize("edit, fragment", [
    (lambda d: d["edges"][0]["interval"].update(b=0.0), "nonpositive length"),
    (lambda d: d["edges"][0].update(head="zzz"), "unknown head"),
    (lambda d: d["vertices"].append({"id": "lonely"}), "isolated"),
    (lambda d: d.update(fiber_dim=0), "schema"),
    (lambda d: d.setdefault("conditions", {}).update(
        x={"type": "conormal", "basis": [[1.0, 0.0]]}), "expected degree*fiber_dim"),
])
def test_validation_messages(edit, fragment):
    doc = {"fiber_dim": 1, "vertices": [{"id": "x"}, {"id": "y"}],
           "edges": [{"id": 0, "tail": "x", "head": "y",
                      "interval": {"kind": "bounded", "a": 0, "b": 1}}]}
    edit(doc)
    problems = validate_document(doc)
    assert any(fragment in p for p in problems), problems


def test_disconnected_graph_is_rejected():
    doc = {"fiber_dim": 1, "vertices": [{"id": i} for i in "abcd"],
           "edges": [{"id": 0, "tail": "a", "head": "b",
                      "interval": {"kind": "bounded", "a": 0, "b": 1}},
                     {"id": 1, "tail": "c", "head": "d",
                      "interval": {"kind": "bounded", "a": 0, "b": 1}}]}
    assert any("disconnected" in p for p in validate_document(doc))


@pytest.mark.parametrize("name", ["segment.json", "star3.json", "star3_half_lines.json",
                                  "leaf_half_line.json"])
def test_example_documents_are_valid(name):
    g = load_graph(EXAMPLES / name)
    assert g.m >= 1
    conditions_to_lagrangian(g).assert_lagrangian()
