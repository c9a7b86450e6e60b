import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farscatter.geometry import (BoundaryCondition, GeometryError, Obstacle, RigidMotion,
                                 apply_motion, circle, contains, curve_from_spec, diameter,
                                 ellipse, eval_curve, hausdorff_distance, kite,
                                 regions_intersect, rotational_symmetry_order,
                                 rounded_triangle, signed_area, trig_curve)

angles = st.floats(0, 2 * math.pi)
shifts = st.tuples(st.floats(-5, 5), st.floats(-5, 5))
CATALOG = [circle(1.0), ellipse(1.0, 0.5), kite(), rounded_triangle()]


def test_circle_point_and_normal():
    p, _, nu = eval_curve(circle(1.0), 0.0)
    np.testing.assert_allclose(p, [1, 0], atol=1e-15)
    np.testing.assert_allclose(nu, [1, 0], atol=1e-15)


def test_ellipse_axis_point():
    p, _, nu = eval_curve(ellipse(2.0, 1.0), math.pi / 2)
    np.testing.assert_allclose(p, [0, 1], atol=1e-15)
    np.testing.assert_allclose(nu, [0, 1], atol=1e-15)


@given(st.floats(-20, 20))
def test_normal_orthogonal_unit(t):
    for c in CATALOG:
        _, tan, nu = eval_curve(c, t)
        assert abs(nu @ tan) < 1e-14
        assert abs(np.linalg.norm(nu) - 1) < 1e-14


@pytest.mark.parametrize("c", [circle(1.0), ellipse(2.0, 0.7), rounded_triangle()])
def test_normal_points_outward_on_convex(c):
    centroid = c.sample(512).mean(axis=0)
    for t in np.linspace(0, 2 * np.pi, 37):
        p, _, nu = eval_curve(c, t)
        assert nu @ (p - centroid) > 0


def test_catalog_is_valid():
    for c in CATALOG:
        assert signed_area(c) > 0
    assert signed_area(kite()) == pytest.approx(1.5 * math.pi, rel=1e-12)


def test_clockwise_curve_rejected():
    with pytest.raises(GeometryError, match="counterclockwise"):
        trig_curve([0, 1], [], [0], [-1])


def test_self_intersecting_curve_rejected():
    # figure-eight-like curve: positive-area loops crossing
    with pytest.raises(GeometryError):
        trig_curve([0, 1, 0, 0], [], [0], [0, 0, 1.5])


def test_identity_motion():
    c = kite()
    moved = apply_motion(c, RigidMotion())
    t = np.linspace(0, 2 * np.pi, 50)
    np.testing.assert_array_equal(moved.points(t), c.points(t))


def test_half_turn_circle_same_set():
    c = circle(1.3)
    moved = apply_motion(c, RigidMotion(math.pi))
    assert hausdorff_distance(c, moved) < 1e-12


@given(angles, shifts)
@settings(max_examples=25, deadline=None)
def test_motion_maps_points_and_normals(theta, z):
    m = RigidMotion(theta, z)
    c = kite()
    moved = apply_motion(c, m)
    t = np.linspace(0, 2 * np.pi, 17)
    np.testing.assert_allclose(moved.points(t), m.apply(c.points(t)), atol=1e-12)
    for ti in t:
        _, _, n0 = eval_curve(c, ti)
        _, _, n1 = eval_curve(moved, ti)
        np.testing.assert_allclose(n1, m.matrix @ n0, atol=1e-12)


@given(angles, shifts)
@settings(max_examples=20, deadline=None)
def test_diameter_invariant(theta, z):
    c = ellipse(1.0, 0.5)
    assert abs(diameter(apply_motion(c, RigidMotion(theta, z))) - diameter(c)) < 1e-12


def test_rotation_matrix_orthogonal():
    u = RigidMotion(0.7).matrix
    np.testing.assert_allclose(u @ u.T, np.eye(2), atol=1e-15)
    assert np.linalg.det(u) == pytest.approx(1.0)


def test_diameter_circle():
    assert abs(diameter(circle(1.5)) - 3.0) < 1e-6


def test_hausdorff_self_zero():
    assert hausdorff_distance(kite(), kite()) == 0.0


def filled_disk_cloud(center, n=120):
    g = np.linspace(-1, 1, n)
    x, y = np.meshgrid(g, g)
    mask = x ** 2 + y ** 2 <= 1
    return np.stack([x[mask] + center[0], y[mask] + center[1]], axis=-1)


def brute_hausdorff(a, b):
    from scipy.spatial.distance import cdist
    d = cdist(a, b)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def test_hausdorff_disjoint_disks_against_dense_clouds():
    oracle = brute_hausdorff(filled_disk_cloud((0, 0)), filled_disk_cloud((3, 0)))
    assert abs(oracle - 3.0) < 2e-2
    value = hausdorff_distance(circle(1.0), circle(1.0, (3.0, 0.0)))
    assert abs(value - 3.0) < 1e-3


def test_hausdorff_containment_correction():
    # small disk inside a big one: d_H = 2 - 0.5, not the boundary-only 1.5 + ...
    big, small = circle(2.0), circle(0.5)
    assert hausdorff_distance(big, small) == pytest.approx(1.5, abs=1e-3)


def test_hausdorff_symmetric_and_triangle():
    cs = [kite(), ellipse(1.0, 0.5), apply_motion(rounded_triangle(), RigidMotion(0.3, (0.5, 0.2)))]
    d = {(i, j): hausdorff_distance(cs[i], cs[j]) for i in range(3) for j in range(3)}
    tol = 2 * 2 * np.pi * 1.6 / 1024
    for i in range(3):
        for j in range(3):
            assert d[i, j] == pytest.approx(d[j, i], abs=1e-12)
            for k in range(3):
                assert d[i, k] <= d[i, j] + d[j, k] + tol


@pytest.mark.parametrize("gap", [2.5, 3.0, 4.2])
def test_hausdorff_congruent_disjoint_disks(gap):
    value = hausdorff_distance(circle(1.0), circle(1.0, (gap, 0.0)))
    assert abs(value - gap) <= 2 * (2 * np.pi / 1024)


@given(angles, shifts)
@settings(max_examples=15, deadline=None)
def test_hausdorff_bounded_by_diameters_when_overlapping(theta, z):
    a = kite()
    b = apply_motion(ellipse(1.0, 0.5), RigidMotion(theta, (z[0] / 5, z[1] / 5)))
    if regions_intersect(a, b):
        assert hausdorff_distance(a, b) <= diameter(a) + diameter(b)


def test_contains_examples():
    assert contains(circle(1.0), (0, 0))
    assert not contains(circle(1.0), (2, 0))


@given(st.floats(-2.5, 2.5), st.floats(-1.5, 1.5))
def test_contains_ellipse_against_implicit_equation(x, y):
    level = (x / 2) ** 2 + y ** 2
    if abs(level - 1) < 1e-6:
        return
    assert contains(ellipse(2.0, 1.0), (x, y)) == (level < 1)


def test_contains_specific_point():
    assert contains(ellipse(2.0, 1.0), (1.5, 0.8)) == ((1.5 / 2) ** 2 + 0.8 ** 2 <= 1)


def test_contains_near_boundary_flagged():
    with pytest.raises(GeometryError, match="boundary"):
        contains(circle(1.0), (1.0 + 1e-12, 0.0))


def test_contains_resolves_close_points():
    assert contains(circle(1.0), (1 - 1e-7, 0.0))
    assert not contains(circle(1.0), (math.cos(0.0031) * (1 + 1e-7), math.sin(0.0031) * (1 + 1e-7)))


def test_symmetry_orders():
    assert rotational_symmetry_order(circle(1.0)) == 0
    assert rotational_symmetry_order(ellipse(1.0, 0.5)) == 2
    assert rotational_symmetry_order(kite()) == 1
    assert rotational_symmetry_order(rounded_triangle()) == 3


def test_spec_round_trip():
    spec = {"family": "ellipse", "a": 1.0, "b": 0.5,
            "motion": {"theta": 0.3, "z": [1.0, -2.0]},
            "bc": {"type": "impedance", "lambda": [1.0, 2.0]}}
    obs = Obstacle.from_spec(spec)
    assert obs.bc == BoundaryCondition.impedance(1 + 2j)
    assert Obstacle.from_spec(obs.to_spec()).to_spec() == obs.to_spec()
    general = trig_curve([0, 1, 0.2], [0.1], [0.3], [1.0, 0.1])
    again = curve_from_spec(general.to_spec())
    np.testing.assert_array_equal(again.xc, general.xc)
    np.testing.assert_array_equal(again.ys, general.ys)


def test_bad_specs():
    with pytest.raises(GeometryError):
        curve_from_spec({"family": "hexagon"})
    with pytest.raises(GeometryError):
        curve_from_spec({"family": "circle"})
    with pytest.raises(GeometryError):
        BoundaryCondition.impedance(1 - 1j)
    with pytest.raises(GeometryError):
        BoundaryCondition("robin")
