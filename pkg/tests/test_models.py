import math

import numpy as np
import pytest

from contact_tops.expr import jacobian_fd
from contact_tops.models import (DegenerateFrameError, Domain, DomainError, ModelError, bracket_table_fd,
                                 builtin_model, chart_model, frame_at, lie_bracket_fd, permute_frame,
                                 to_frame_components, top_table, transform_frame)


def qmul(p, q):
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack([a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
                     a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
                     a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
                     a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2], axis=-1)


UNITS = {"i": np.array([0.0, 1, 0, 0]), "j": np.array([0.0, 0, 1, 0]), "k": np.array([0.0, 0, 0, 1])}


def test_flat3(flat):
    x = np.array([0.3, -0.1, 0.4])
    assert np.array_equal(frame_at(flat, x), np.eye(3))
    assert not np.any(flat.analytic_structure)


def test_heisenberg_frame(heis):
    f = frame_at(heis, [2.0, 0.0, 0.0])
    assert np.array_equal(f, [[1, 0, 0], [0, 2, 1], [0, 1, 0]])


def test_s3_frame_is_right_multiplication(s3):
    q = Domain.sphere().sample(20, 3)
    f = frame_at(s3, q)
    for row, u in enumerate("ijk"):
        assert np.abs(f[:, row] - qmul(q, UNITS[u])).max() < 1e-15
    assert np.array_equal(frame_at(s3, [1.0, 0, 0, 0])[0], [0, 1, 0, 0])


def test_torus3_frame():
    m = builtin_model("torus3", n=1)
    f = frame_at(m, [math.pi / 2, 0.3, 0.1])
    assert np.allclose(f[0], [0, 0, 1], atol=1e-15)
    t = np.array([0.7, 1.0, 2.0])
    f = frame_at(m, t)
    assert np.allclose(f, [[0, math.cos(0.7), math.sin(0.7)], [0, -math.sin(0.7), math.cos(0.7)], [1, 0, 0]])


def test_builtin_bracket_examples(flat, s3, heis):
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, (10, 3))
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            assert np.abs(lie_bracket_fd(flat, i, j, x)).max() == 0.0
    q = s3.domain.sample(10, 1)
    assert np.abs(lie_bracket_fd(s3, 1, 2, q) - [0, 0, 2]).max() < 1e-6
    assert np.abs(lie_bracket_fd(heis, 1, 2, x) - [0, 0, 1]).max() < 1e-8


BUILTINS = [("flat3", {}), ("torus3", {"n": 1}), ("torus3", {"n": 3}), ("torus3_skew", {}),
            ("torus3_skew", {"eps": 0.8}), ("s3", {}), ("heisenberg", {}),
            ("const_structure", {"c": 0.0, "k": 2.5}), ("const_structure", {"c": -1.5, "k": 0.0}),
            ("const_structure", {"c": 3.0, "k": 1.0}), ("const_structure", {"c": -1.0, "k": -4.0}),
            ("const_structure", {"c": 0.0, "k": 0.0})]


@pytest.mark.parametrize("name,params", BUILTINS)
def test_numeric_brackets_match_tables(name, params):
    m = builtin_model(name, **params)
    x = m.domain.sample(50, 11)
    err = np.abs(bracket_table_fd(m, x) - m.analytic_structure).max()
    assert err < 1e-6


def test_const_structure_constants():
    for c, k in [(0.0, 2.5), (-1.5, 0.0), (3.0, 1.0), (-1.0, -4.0)]:
        m = builtin_model("const_structure", c=c, k=k)
        assert np.abs(m.analytic_structure - top_table(c, k)).max() < 1e-15


def test_sphere_brackets_stay_tangent(s3):
    q = s3.domain.sample(50, 5)
    _, normal = bracket_table_fd(s3, q, with_normal=True)
    assert np.abs(normal).max() < 1e-8
    tangency = np.einsum("pia,pa->pi", s3.frame(q), q)
    assert np.abs(tangency).max() < 1e-9


def test_frame_components_round_trip(s3, heis):
    for m in (s3, heis):
        x = m.domain.sample(5, 2)
        v = np.random.default_rng(0).normal(size=(5, 3))
        amb = np.einsum("pi,pia->pa", v, m.frame(x))
        assert np.allclose(to_frame_components(m, x, amb), v, atol=1e-12)


def test_frame_at_errors(s3):
    with pytest.raises(DomainError):
        frame_at(s3, [1.0, 1.0, 0.0, 0.0])
    bad = chart_model("bad", "xyz", [["1", "0", "0"], ["x", "0", "0"], ["0", "0", "1"]], Domain.box([-1] * 3, [1] * 3))
    with pytest.raises(DegenerateFrameError):
        frame_at(bad, [0.5, 0.0, 0.0])


def test_invalid_parameters():
    with pytest.raises(ModelError):
        builtin_model("torus3", n=0)
    with pytest.raises(ModelError):
        builtin_model("torus3", n=1.5)
    with pytest.raises(ModelError):
        builtin_model("klein")
    with pytest.raises(ModelError):
        builtin_model("const_structure", c=1.0, k=-1.0)
    with pytest.raises(ModelError):
        chart_model("short", "xyz", [["1", "0"], ["0", "1"], ["0", "0"]], Domain.box([0] * 3, [1] * 3))
    with pytest.raises(ModelError):
        Domain.box([0, 0, 1], [1, 1, 1])


def test_domain_sampling_is_deterministic():
    d = Domain.box([-1, 0, 2], [1, 3, 4])
    a, b = d.sample(30, 9), d.sample(30, 9)
    assert np.array_equal(a, b)
    assert np.all(a >= [-1, 0, 2]) and np.all(a <= [1, 3, 4])
    assert not np.array_equal(a, d.sample(30, 10))
    q = Domain.sphere().sample(40, 1)
    assert np.abs(np.linalg.norm(q, axis=1) - 1).max() < 1e-15


def test_periodic_display():
    d = Domain.periodic()
    assert np.allclose(d.display(np.array([7.0, -0.5, 1.0])), [7 - 2 * math.pi, 2 * math.pi - 0.5, 1.0])


def test_transform_flips_orientation(s3):
    t = transform_frame(s3, np.diag([1.0, -1.0, 1.0]))
    assert t.orientation == -1 and t.analytic_structure is None
    assert transform_frame(s3, np.diag([2.0, 2.0, 3.0])).orientation == 1
    with pytest.raises(ModelError):
        transform_frame(s3, np.zeros((3, 3)))


def test_permute_keeps_table_consistent(heis):
    p = permute_frame(heis, (2, 3, 1))
    x = p.domain.sample(20, 4)
    assert np.abs(bracket_table_fd(p, x) - p.analytic_structure).max() < 1e-8


def test_skew_torus_periodicity():
    m = builtin_model("torus3_skew")
    x = m.domain.sample(5, 0)
    shifted = x.copy()
    shifted[:, 1] += 2 * math.pi
    assert not np.allclose(m.frame(x), m.frame(shifted))
    for i in (0, 2):
        shifted = x.copy()
        shifted[:, i] += 2 * math.pi
        assert np.allclose(m.frame(x), m.frame(shifted), atol=1e-12)


# --- the explicit map between the two S^3 frame families ---------------------

def _pushforward_defect(f, q, u):
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    J = jacobian_fd(f, q)
    pushed = np.einsum("pab,pb->pa", J, qmul(q, UNITS[u]))
    target = qmul(UNITS[u], f(q))
    return np.abs(pushed - target).max()


def test_conjugation_map_preserves_right_fields():
    # f(q) = (q1, q2, -q3, -q4) is conjugation by i: it maps qi to f(q) i, not to i f(q)
    f = lambda q: q * np.array([1.0, 1, -1, -1])
    q = Domain.sphere().sample(50, 8)
    J = jacobian_fd(f, q)
    pushed = np.einsum("pab,pb->pa", J, qmul(q, UNITS["i"]))
    assert np.abs(pushed - qmul(f(q), UNITS["i"])).max() < 1e-9
    assert _pushforward_defect(f, q, "i") > 0.5


def test_orientation_reversing_map_exchanges_families():
    # q -> j * conj(q) sends the field qi to the field iq
    f = lambda q: np.stack([q[..., 2], -q[..., 3], q[..., 0], q[..., 1]], axis=-1)
    q = Domain.sphere().sample(50, 8)
    assert _pushforward_defect(f, q, "i") < 1e-9
    assert np.linalg.det(jacobian_fd(f, q[0])) == pytest.approx(-1.0)
