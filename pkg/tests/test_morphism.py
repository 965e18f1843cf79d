import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebroids.algebroid import dual_frame_form, function_form, make_form
from algebroids.morphism import (
    MorphismLocal,
    compose,
    dual_frame_probes,
    identity_morphism,
    morphism_defect,
    pullback_form,
)
from algebroids.numerics import SmoothMap, linear_map
from builders import so3, tangent_algebroid


def rotation(axis, angle):
    axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def frame_map(A, F, B=None):
    return MorphismLocal(A, B or A, linear_map(np.zeros((0, 0))), lambda x: F)


def _probes(A):
    return dual_frame_probes(A)


def test_identity_pullback_is_identity():
    A = tangent_algebroid(2)
    w = make_form(A.bundle, 1, {(0,): lambda y: y[1] ** 3, (1,): lambda y: np.exp(y[0])})
    pw = pullback_form(identity_morphism(A), w)
    for x in ([0.3, -0.2], [1.0, 1.0]):
        assert np.max(np.abs(pw.values("U", x) - w.values("U", x))) < 1e-12


def test_function_pullback():
    A = tangent_algebroid(2)
    phi = MorphismLocal(A, A, linear_map(2 * np.eye(2)), lambda x: 2 * np.eye(2))
    pg = pullback_form(phi, function_form(A.bundle, lambda y: y[0]))
    assert pg.values("U", [0.35, 0.0])[0] == pytest.approx(0.7)


def test_rotated_coframe():
    A = so3()
    R = rotation([1, 2, 3], 0.7)
    pw = pullback_form(frame_map(A, R), dual_frame_form(A.bundle, 0))
    assert np.allclose(pw.values("U", []), R[0], atol=1e-15)


def test_identity_is_a_morphism():
    for A in (so3(), tangent_algebroid(2)):
        assert morphism_defect(identity_morphism(A), _probes(A)).value < 1e-9


@pytest.mark.parametrize("axis,angle", [([0, 0, 1], 0.3), ([1, -1, 2], 2.1), ([0.2, 0.9, -0.4], -1.3)])
def test_rotations_are_automorphisms(axis, angle):
    A = so3()
    assert morphism_defect(frame_map(A, rotation(axis, angle)), _probes(A)).value < 1e-9


def test_scaling_one_axis_is_not():
    A = so3()
    # f* theta1 = 2 theta1, so d(f* theta1) = -2 theta2^theta3 against f* d theta1 = -theta2^theta3.
    assert morphism_defect(frame_map(A, np.diag([2.0, 1.0, 1.0])), _probes(A)).value >= 0.5


def test_empty_probe_list():
    A = so3()
    with pytest.raises(ValueError, match="probe"):
        morphism_defect(identity_morphism(A), [])


def test_too_high_probe_degree():
    A = so3()
    with pytest.raises(ValueError):
        morphism_defect(identity_morphism(A), [make_form(A.bundle, 3, {(0, 1, 2): lambda x: 1.0})])


def _smooth_map():
    """f0(x) = (x1 + x2^2, sin x1) on R^2 with its analytic Jacobian as fibre map."""
    def f(x):
        return np.array([x[0] + x[1] ** 2, np.sin(x[0])])

    def df(x):
        return np.array([[1.0, 2 * x[1]], [np.cos(x[0]), 0.0]])

    return SmoothMap(2, 2, f, df), df


def test_tangent_map_is_a_morphism():
    A = tangent_algebroid(2)
    f, df = _smooth_map()
    phi = MorphismLocal(A, A, f, df)
    w = make_form(A.bundle, 1, {(0,): lambda y: y[1], (1,): lambda y: y[0] ** 2})
    assert morphism_defect(phi, _probes(A) + [w]).value < 1e-5


def test_wrong_fibre_map_fails():
    A = tangent_algebroid(2)
    f, df = _smooth_map()
    phi = MorphismLocal(A, A, f, lambda x: df(x) + np.array([[0.0, 0.0], [0.0, 0.5]]))
    assert morphism_defect(phi, _probes(A)).value > 0.1


def test_rotation_composite_is_product():
    A = so3()
    R1, R2 = rotation([0, 0, 1], 0.3), rotation([1, 0, 0], -0.8)
    c = compose(frame_map(A, R2), frame_map(A, R1))
    assert np.allclose(c.F([]), R2 @ R1, atol=1e-15)
    assert morphism_defect(c, _probes(A)).value < 1e-9


def test_composite_of_tangent_maps_stays_verified():
    A = tangent_algebroid(2)
    f, df = _smooth_map()
    phi = MorphismLocal(A, A, f, df)
    single = morphism_defect(phi, _probes(A)).value
    both = morphism_defect(compose(phi, phi), _probes(A)).value
    assert single < 1e-5 and both < 3e-5


def test_category_laws():
    A = tangent_algebroid(2)
    f, df = _smooth_map()
    p1 = MorphismLocal(A, A, f, df)
    p2 = MorphismLocal(A, A, linear_map([[0.5, 1.0], [0.0, 2.0]]), lambda x: np.array([[0.5, 1.0], [0.0, 2.0]]))
    p3 = MorphismLocal(A, A, SmoothMap(2, 2, lambda x: x ** 3), lambda x: np.diag(3 * x ** 2))
    ident = identity_morphism(A)
    left, right = compose(compose(p3, p2), p1), compose(p3, compose(p2, p1))
    for x in np.random.default_rng(0).uniform(-1, 1, (20, 2)):
        assert np.max(np.abs(left.F(x) - right.F(x))) < 1e-12
        assert np.max(np.abs(left.base_map(x) - right.base_map(x))) < 1e-12
        for unit in (compose(ident, p1), compose(p1, ident)):
            assert np.max(np.abs(unit.F(x) - p1.F(x))) < 1e-12
            assert np.max(np.abs(unit.base_map(x) - p1.base_map(x))) < 1e-12


def test_mismatched_base_dims():
    with pytest.raises(ValueError, match="base map"):
        MorphismLocal(so3(), tangent_algebroid(2), linear_map(np.zeros((3, 0))), lambda x: np.zeros((2, 3)))


angles = st.floats(-3, 3)


@given(st.lists(st.floats(-2, 2), min_size=9, max_size=9), st.lists(st.floats(-2, 2), min_size=9, max_size=9),
       st.sampled_from([0, 1, 2]))
def test_pullback_is_functorial(a, b, g):
    # Pure pullback identity; the maps need not be algebroid morphisms.
    A = so3()
    F1, F2 = np.reshape(a, (3, 3)), np.reshape(b, (3, 3))
    p1, p2 = frame_map(A, F1), frame_map(A, F2)
    w2 = make_form(A.bundle, 2, {(0, 1): lambda x: 1.5, (0, 2): lambda x: -0.5, (1, 2): lambda x: 2.0})
    for w in (dual_frame_form(A.bundle, g), w2):
        lhs = pullback_form(p1, pullback_form(p2, w)).values("U", [])
        rhs = pullback_form(compose(p2, p1), w).values("U", [])
        assert np.max(np.abs(lhs - rhs)) < 1e-10


@given(angles, angles, angles, angles)
def test_verified_morphisms_compose(a1, a2, a3, a4):
    A = so3()
    p1 = frame_map(A, rotation([np.cos(a1), np.sin(a1), 0.5], a2))
    p2 = frame_map(A, rotation([0.3, np.cos(a3), np.sin(a3)], a4))
    assert morphism_defect(compose(p2, p1), _probes(A)).value < 3e-9
