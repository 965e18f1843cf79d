import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from algebroids.numerics import (
    NonFiniteError,
    SmoothMap,
    Trajectory,
    default_step,
    directional_derivative,
    fd_jacobian,
    jacobian,
    linear_map,
    rk4_integrate,
)

finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)


def test_linear_jacobian_is_exact():
    A = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 4.0]])
    F = SmoothMap(3, 2, lambda x: A @ x)
    assert np.allclose(fd_jacobian(F, [0.3, -1.2, 7.0], h=1e-4), A, atol=1e-9, rtol=0)


def test_square_at_three():
    F = SmoothMap(1, 1, lambda x: x ** 2)
    assert abs(fd_jacobian(F, [3.0], h=1e-5)[0, 0] - 6.0) < 1e-8


def test_product_and_sum():
    F = SmoothMap(2, 2, lambda z: [z[0] * z[1], z[0] + z[1]])
    assert np.allclose(fd_jacobian(F, [2.0, 1.0]), [[1, 2], [1, 1]], atol=1e-8, rtol=0)


def test_nonfinite_probe_is_reported():
    F = SmoothMap(1, 1, lambda x: [1.0 / x[0] if x[0] > 0 else math.nan])
    with pytest.raises(NonFiniteError) as info:
        fd_jacobian(F, [0.0], h=1e-3)
    assert info.value.probe is not None


def test_analytic_jacobian_wins():
    F = SmoothMap(1, 1, lambda x: x ** 2, analytic_jacobian=lambda x: [[42.0]])
    assert jacobian(F, [1.0])[0, 0] == 42.0
    assert abs(fd_jacobian(F, [1.0])[0, 0] - 2.0) < 1e-8


def test_step_scales_with_point():
    assert default_step([0.1, -0.2]) == pytest.approx(1e-5)
    assert default_step([10.0, -300.0]) == pytest.approx(3e-3)


def test_directional_linear():
    A = np.array([[2.0, 1.0], [0.0, -3.0], [1.0, 1.0]])
    v = np.array([0.7, -1.1])
    assert np.allclose(directional_derivative(linear_map(A), [5.0, 2.0], v), A @ v, atol=1e-9)


def test_directional_of_inner_product():
    F = SmoothMap(2, 1, lambda v: [v @ v])
    assert abs(directional_derivative(F, [1.0, 2.0], [1.0, 2.0])[0] - 10.0) < 1e-7


def test_directional_euler_on_quadratic_spray():
    # Degree 2 in v, so dG_v(v) = 2 G(v).
    G = SmoothMap(3, 3, lambda v: (v @ v) * np.array([1.0, 0.0, 0.0]) + np.cross([0.2, -0.4, 1.0], v) * v[2])
    v = np.array([0.4, -1.3, 0.9])
    assert np.allclose(directional_derivative(G, v, v), 2 * G(v), atol=1e-6)


def test_zero_field_keeps_state():
    traj = rk4_integrate(SmoothMap(2, 2, lambda x: np.zeros(2)), [1.5, -2.0], (0.0, 3.0), 17)
    assert np.all(traj.states == [1.5, -2.0])
    assert len(traj.times) == 18


def test_exponential():
    traj = rk4_integrate(SmoothMap(1, 1, lambda x: x), [1.0], (0.0, 1.0), 100)
    assert abs(traj.final[0] - math.e) < 1e-8


def test_quarter_turn():
    rot = SmoothMap(2, 2, lambda z: [-z[1], z[0]])
    traj = rk4_integrate(rot, [1.0, 0.0], (0.0, math.pi / 2), 200)
    assert np.allclose(traj.final, [0.0, 1.0], atol=1e-7)


def test_blowup_returns_partial():
    # Explodes near t = 1e-6, well inside the first step.
    with np.errstate(over="ignore", invalid="ignore"):
        traj = rk4_integrate(SmoothMap(1, 1, lambda x: x ** 2 * 1e6), [1.0], (0.0, 1.0), 50)
    assert not traj.ok
    assert traj.error
    assert np.all(np.isfinite(traj.states))


def test_times_must_increase():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)))


@pytest.mark.parametrize("field,x0,exact", [
    (lambda x: x, [1.0], lambda t: [math.exp(t)]),
    (lambda z: [-z[1], z[0]], [1.0, 0.0], lambda t: [math.cos(t), math.sin(t)]),
    (lambda x: x * (1 - x), [0.2], lambda t: [1 / (1 + 4 * math.exp(-t))]),
])
def test_fourth_order_convergence(field, x0, exact):
    vf = SmoothMap(len(x0), len(x0), field)
    err = [np.max(np.abs(rk4_integrate(vf, x0, (0.0, 2.0), n).final - exact(2.0))) for n in (20, 40)]
    assert 12 <= err[0] / err[1] <= 20


def _cubic(x):
    return np.array([np.sin(x[0]) * x[1], x[0] ** 2 - x[1] ** 3, np.exp(0.3 * x[0])])


def _mix(y):
    return np.array([y[0] * y[1] + y[2], np.cos(y[1])])


@given(arrays(float, 2, elements=finite))
def test_chain_rule(x):
    inner = SmoothMap(2, 3, _cubic)
    outer = SmoothMap(3, 2, _mix)
    both = SmoothMap(2, 2, lambda z: _mix(_cubic(z)))
    lhs = fd_jacobian(both, x)
    rhs = fd_jacobian(outer, inner(x)) @ fd_jacobian(inner, x)
    assert np.max(np.abs(lhs - rhs)) < 1e-4


@given(arrays(float, 2, elements=finite), arrays(float, 2, elements=finite))
def test_directional_matches_jacobian(x, v):
    F = SmoothMap(2, 3, _cubic)
    assert np.max(np.abs(directional_derivative(F, x, v) - fd_jacobian(F, x) @ v)) < 1e-6
