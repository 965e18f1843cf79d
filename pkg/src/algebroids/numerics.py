"""Dense numerical kernel: smooth maps, central differences, fixed-step RK4.

Every routine takes its dimensions from the data at runtime, so the same code
serves a point base (dimension 0) and any finite model space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Tolerance tiers used by every defect check downstream.
EXACT_TOL = 1e-9
FD_TOL = 1e-5
NESTED_TOL = 1e-4
ANALYTIC_TIGHTENING = 10.0

DEFAULT_REL_STEP = 1e-5


class NonFiniteError(ArithmeticError):
    """Raised when a map returns inf/nan at a probe point."""

    def __init__(self, probe, value=None):
        self.probe = np.asarray(probe, dtype=float)
        self.value = value
        super().__init__(f"non-finite evaluation at probe {self.probe.tolist()}")


@dataclass(frozen=True)
class SmoothMap:
    """A map R^dom_dim -> R^cod_dim with an optional analytic Jacobian."""

    dom_dim: int
    cod_dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    analytic_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dom_dim < 0 or self.cod_dim < 0:
            raise ValueError("dimensions must be nonnegative")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dom_dim,):
            raise ValueError(f"expected a point of length {self.dom_dim}, got shape {x.shape}")
        y = np.asarray(self.eval(x), dtype=float).reshape(-1)
        if y.shape != (self.cod_dim,):
            raise ValueError(f"map returned length {y.size}, expected {self.cod_dim}")
        return y


def constant_map(dom_dim: int, value) -> SmoothMap:
    value = np.array(value, dtype=float).reshape(-1)
    value.setflags(write=False)
    zero = np.zeros((value.size, dom_dim))
    zero.setflags(write=False)
    return SmoothMap(dom_dim, value.size, lambda x: value, lambda x: zero)


def linear_map(A) -> SmoothMap:
    A = np.array(A, dtype=float)
    A.setflags(write=False)
    return SmoothMap(A.shape[1], A.shape[0], lambda x: A @ x, lambda x: A)


def default_step(x) -> float:
    x = np.asarray(x, dtype=float)
    scale = np.max(np.abs(x)) if x.size else 0.0
    return DEFAULT_REL_STEP * max(1.0, scale)


def _checked(F: SmoothMap, probe):
    y = F(probe)
    if not np.all(np.isfinite(y)):
        raise NonFiniteError(probe, y)
    return y


def fd_jacobian(F: SmoothMap, x, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian, shape (cod_dim, dom_dim)."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = default_step(x)
    if h <= 0:
        raise ValueError("step must be positive")
    J = np.empty((F.cod_dim, F.dom_dim))
    for j in range(F.dom_dim):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (_checked(F, xp) - _checked(F, xm)) / (2.0 * h)
    return J


def jacobian(F: SmoothMap, x, h: Optional[float] = None) -> np.ndarray:
    """Analytic Jacobian when the map carries one, otherwise `fd_jacobian`."""
    if F.analytic_jacobian is not None:
        J = np.asarray(F.analytic_jacobian(np.asarray(x, dtype=float)), dtype=float)
        return J.reshape(F.cod_dim, F.dom_dim)
    return fd_jacobian(F, x, h)


def directional_derivative(F: SmoothMap, x, v, h: Optional[float] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape:
        raise ValueError("direction and point must have the same length")
    if F.analytic_jacobian is not None:
        return jacobian(F, x) @ v
    if h is None:
        h = default_step(x)
    if h <= 0:
        raise ValueError("step must be positive")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros(F.cod_dim)
    h = h / max(1.0, norm)
    return (_checked(F, x + h * v) - _checked(F, x - h * v)) / (2.0 * h)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    ok: bool = True
    error: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(len(times), -1)
        if len(times) != len(states):
            raise ValueError("times and states must have the same length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4_integrate(vf: SmoothMap, x0, t_span, steps: int) -> Trajectory:
    """Classical fixed-step RK4 for an autonomous field.

    A non-finite state stops the integration; the trajectory up to the last
    finite state is returned with ``ok=False``.
    """
    if vf.dom_dim != vf.cod_dim:
        raise ValueError("vector field must map R^n to R^n")
    t0, t1 = map(float, t_span)
    if steps < 1 or not t1 > t0:
        raise ValueError("need steps >= 1 and t1 > t0")
    h = (t1 - t0) / steps
    times = t0 + h * np.arange(steps + 1)
    times[-1] = t1
    states = np.empty((steps + 1, vf.dom_dim))
    states[0] = np.asarray(x0, dtype=float)
    y = states[0].copy()
    for n in range(steps):
        try:
            k1 = vf(y)
            k2 = vf(y + 0.5 * h * k1)
            k3 = vf(y + 0.5 * h * k2)
            k4 = vf(y + h * k3)
        except (ArithmeticError, ValueError) as exc:
            return Trajectory(times[: n + 1], states[: n + 1], ok=False, error=str(exc))
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            return Trajectory(
                times[: n + 1], states[: n + 1], ok=False,
                error=f"non-finite state at t={times[n + 1]!r}",
            )
        states[n + 1] = y
    return Trajectory(times, states)
