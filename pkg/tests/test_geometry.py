import numpy as np
import pytest

from devport import geometry
from devport.errors import DimensionMismatch, EmptyIntersection, ValidationError
from devport.geometry import (
    PwlConvexFunction,
    SteinerConfig,
    VPolytope,
    contains,
    extended_gradient,
    extreme_filter,
    hausdorff,
    intersect,
    minkowski_sum,
    steiner_point,
    support,
)


def _match(got, expected, tol=1e-8):
    got = np.asarray(got, float)
    expected = np.asarray(expected, float)
    if got.shape[0] != expected.shape[0]:
        return False
    used = set()
    for e in expected:
        hit = next(
            (i for i, g in enumerate(got) if i not in used and np.max(np.abs(g - e)) <= tol),
            None,
        )
        if hit is None:
            return False
        used.add(hit)
    return True


def test_extreme_filter_collinear():
    pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]
    poly = extreme_filter(pts)
    assert _match(poly.vertices, [[0.0, 0.0], [2.0, 2.0]])


def test_extreme_filter_square_plus_center():
    pts = [[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]]
    poly = extreme_filter(pts)
    assert poly.n_vertices == 4
    assert not any(np.allclose(v, [0.5, 0.5]) for v in poly.vertices)


def test_minkowski_translation():
    square = VPolytope([[0, 0], [1, 0], [0, 1], [1, 1]])
    shifted = minkowski_sum(square, VPolytope([[2.0, 3.0]]))
    assert _match(shifted.vertices, [[2, 3], [3, 3], [2, 4], [3, 4]])


def test_minkowski_segments_to_square():
    s1 = VPolytope([[0.0, 0.0], [1.0, 0.0]])
    s2 = VPolytope([[0.0, 0.0], [0.0, 1.0]])
    square = minkowski_sum(s1, s2)
    assert _match(square.vertices, [[0, 0], [1, 0], [0, 1], [1, 1]])


def test_minkowski_contains_origin():
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = VPolytope(rng.normal(size=(5, 2)))
        diff = minkowski_sum(p, VPolytope(-p.vertices))
        assert contains(diff, np.zeros(2))


def test_intersect_idempotent():
    p = extreme_filter([[0, 0], [1, 0], [0, 1]])
    q = intersect(p, p)
    assert _match(q.vertices, p.vertices)


def test_intersect_disjoint_segments():
    s1 = VPolytope([[0.0], [1.0]])
    s2 = VPolytope([[2.0], [3.0]])
    with pytest.raises(EmptyIntersection):
        intersect(s1, s2)


def test_intersect_squares():
    a = VPolytope([[0, 0], [2, 0], [0, 2], [2, 2]])
    b = VPolytope([[1, 1], [3, 1], [1, 3], [3, 3]])
    c = intersect(a, b)
    assert _match(c.vertices, [[1, 1], [2, 1], [1, 2], [2, 2]])


def test_support_square():
    square = VPolytope([[0, 0], [1, 0], [0, 1], [1, 1]])
    value, face = support(square, [1.0, 0.0])
    assert value == pytest.approx(1.0)
    assert _match(face.vertices, [[1, 0], [1, 1]])


def test_support_singleton_and_zero_direction():
    point = VPolytope([[2.0, -1.0]])
    value, face = support(point, [3.0, 4.0])
    assert value == pytest.approx(2.0)
    with pytest.raises(ValidationError):
        support(point, [0.0, 0.0])


def test_steiner_singleton():
    p, err = steiner_point(VPolytope([[1.0, 2.0, 3.0]]))
    assert np.allclose(p, [1, 2, 3])
    assert np.all(err == 0)


def test_steiner_segment_midpoint_3d():
    poly = VPolytope([[1.5, 1.0, 0.5], [4 / 3, 4 / 3, 1 / 3]])
    p, err = steiner_point(poly)
    assert np.allclose(p, [17 / 12, 7 / 6, 5 / 12], atol=1e-12)
    assert np.all(err == 0)


def test_steiner_square_center():
    square = VPolytope([[0, 0], [1, 0], [0, 1], [1, 1]])
    p, _ = steiner_point(square)
    assert np.allclose(p, [0.5, 0.5], atol=1e-12)


def _random_rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    q *= np.sign(np.diag(r))
    return q


def test_steiner_membership_and_rigid_embedding_2d():
    rng = np.random.default_rng(2)
    for _ in range(10):
        pts = rng.normal(size=(6, 2))
        poly = extreme_filter(pts)
        exact, _ = steiner_point(poly)
        assert contains(poly, exact, tol=1e-7)
        # Rigid embedding into 3-d: the Steiner point moves with the polygon.
        rot = _random_rotation(rng, 3)
        shift = rng.normal(size=3)
        lifted = np.column_stack([poly.vertices, np.zeros(poly.n_vertices)]) @ rot.T + shift
        moved, err = steiner_point(VPolytope(lifted))
        assert np.all(err == 0)
        expected = rot @ np.append(exact, 0.0) + shift
        assert np.max(np.abs(moved - expected)) <= 1e-9


def test_steiner_mc_on_rotated_boxes():
    # A box is symmetric about its center, so the Steiner point is the center.
    rng = np.random.default_rng(6)
    corners = np.array(
        [[i, j, k] for i in (0.0, 1.0) for j in (0.0, 1.0) for k in (0.0, 1.0)]
    )
    for _ in range(5):
        rot = _random_rotation(rng, 3)
        scale = rng.uniform(0.5, 2.0, size=3)
        shift = rng.normal(size=3)
        verts = (corners * scale) @ rot.T + shift
        mc, err = steiner_point(VPolytope(verts), SteinerConfig(samples=20000, seed=1))
        center = (np.full(3, 0.5) * scale) @ rot.T + shift
        tol = 3 * np.max(err) + 1e-9
        assert np.max(np.abs(mc - center)) <= tol


def test_steiner_additivity_2d_exact():
    rng = np.random.default_rng(9)
    for _ in range(10):
        p1 = extreme_filter(rng.normal(size=(5, 2)))
        p2 = extreme_filter(rng.normal(size=(5, 2)))
        s1, _ = steiner_point(p1)
        s2, _ = steiner_point(p2)
        s12, _ = steiner_point(minkowski_sum(p1, p2))
        assert np.allclose(s12, s1 + s2, atol=1e-9)


def test_steiner_motion_equivariance_2d():
    rng = np.random.default_rng(13)
    for _ in range(10):
        poly = extreme_filter(rng.normal(size=(6, 2)))
        theta = rng.uniform(0, 2 * np.pi)
        rot = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        q = rng.normal(size=2)
        moved = VPolytope(poly.vertices @ rot.T + q)
        s_moved, _ = steiner_point(moved)
        s, _ = steiner_point(poly)
        assert np.allclose(s_moved, rot @ s + q, atol=1e-9)


def test_steiner_continuity_smoke():
    rng = np.random.default_rng(21)
    poly = extreme_filter(rng.normal(size=(6, 2)))
    s, _ = steiner_point(poly)
    eps = 1e-6
    wiggled = VPolytope(poly.vertices + rng.uniform(-eps, eps, poly.vertices.shape))
    s2, _ = steiner_point(wiggled)
    assert np.max(np.abs(s2 - s)) <= 100 * eps


def test_extended_gradient_single_piece():
    f = PwlConvexFunction([[1.0, 2.0]], [0.0])
    assert np.allclose(extended_gradient(f, [3.0, 4.0]), [1.0, 2.0])


def test_extended_gradient_abs_at_zero():
    f = PwlConvexFunction([[1.0], [-1.0]], [0.0, 0.0])
    assert extended_gradient(f, [0.0]) == pytest.approx(0.0, abs=1e-12)


def test_extended_gradient_three_pieces():
    f = PwlConvexFunction([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], np.zeros(3))
    g = extended_gradient(f, [0.8, 0.8])
    assert np.allclose(g, [0.5, 0.5], atol=1e-12)


def test_extended_gradient_matches_classical():
    rng = np.random.default_rng(17)
    f = PwlConvexFunction(rng.normal(size=(4, 3)), rng.normal(size=4))
    for _ in range(20):
        y = rng.normal(size=3)
        vals = f.gradients @ y + f.intercepts
        order = np.sort(vals)
        if order[-1] - order[-2] < 1e-6:
            continue  # only check smooth points
        g = extended_gradient(f, y)
        assert np.allclose(g, f.gradients[np.argmax(vals)])


def test_hausdorff_basics():
    square = VPolytope([[0, 0], [1, 0], [0, 1], [1, 1]])
    assert hausdorff(square, square) == pytest.approx(0.0, abs=1e-8)
    v = VPolytope([[3.0, 4.0]])
    origin = VPolytope([[0.0, 0.0]])
    assert hausdorff(origin, v) == pytest.approx(5.0, abs=1e-8)
    shifted = VPolytope(square.vertices + np.array([1.0, 0.0]))
    assert hausdorff(square, shifted) == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(DimensionMismatch):
        hausdorff(square, VPolytope([[1.0]]))


def test_face_enumeration_square():
    face = geometry.enumerate_face_vertices(
        a_ub=np.vstack([np.eye(2), -np.eye(2)]),
        b_ub=np.array([1.0, 1.0, 0.0, 0.0]),
        a_eq=np.zeros((0, 2)),
        b_eq=np.zeros(0),
    )
    assert _match(face.vertices, [[0, 0], [1, 0], [0, 1], [1, 1]])


def test_face_enumeration_with_equality():
    face = geometry.enumerate_face_vertices(
        a_ub=np.vstack([np.eye(2), -np.eye(2)]),
        b_ub=np.array([1.0, 1.0, 0.0, 0.0]),
        a_eq=np.array([[1.0, 1.0]]),
        b_eq=np.array([1.0]),
    )
    assert _match(face.vertices, [[1, 0], [0, 1]])
