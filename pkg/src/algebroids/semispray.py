"""Semisprays and sprays on an anchored bundle.

In a chart a semispray is S(x, u) = (x, u, rho_U(x) u, -2 G(x, u)); only the
coefficients G are stored, and the base-velocity slot is rebuilt from the
anchor so that pi_* S = rho holds by construction.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .bundle import (
    AnchoredBundleSpec,
    Defect,
    TransitionMap,
    anchor_compat_defect,
    max_defect,
    sample_points,
)
from .numerics import SmoothMap, directional_derivative, rk4_integrate

DEFAULT_LAMBDAS = (0.5, 2.0, 3.0)
# Homogeneity is only sampled outside this ball around the zero section.
ZERO_SECTION_RADIUS = 0.1
EULER_DEGREE_LAMBDAS = (2.0, 4.0)
DEGENERATE_NORM = 1e-9


@dataclass(frozen=True)
class SemisprayLocal:
    bundle: AnchoredBundleSpec
    G: Mapping[str, SmoothMap]

    def coefficients(self, chart: str) -> SmoothMap:
        try:
            return self.G[chart]
        except KeyError:
            raise LookupError(f"semispray has no coefficients on chart {chart!r}") from None

    def field(self, chart: Optional[str] = None) -> SmoothMap:
        """The vector field (x, u) -> (rho_U(x) u, -2 G(x, u)) on R^(m+k)."""
        chart = chart or self.bundle.default_chart
        m, k = self.bundle.base_dim, self.bundle.fibre_dim
        G = self.coefficients(chart)

        def vf(z):
            x, u = z[:m], z[m:]
            return np.concatenate([self.bundle.rho(chart, x) @ u, -2.0 * G(z)])

        return SmoothMap(m + k, m + k, vf)


def build_semispray(bundle: AnchoredBundleSpec, G: Mapping[str, SmoothMap]) -> SemisprayLocal:
    m, k = bundle.base_dim, bundle.fibre_dim
    for chart, g in G.items():
        if chart not in bundle.charts:
            raise LookupError(f"coefficients given on unknown chart {chart!r}")
        if g.cod_dim != k:
            raise ValueError(f"G on chart {chart!r} has codomain {g.cod_dim}, fibre dimension is {k}")
        if g.dom_dim != m + k:
            raise ValueError(f"G on chart {chart!r} must take (x, u) of length {m + k}")
    return SemisprayLocal(bundle, dict(G))


@dataclass(frozen=True)
class BundleCurve:
    """A curve t -> (x(t), w(t)) in one chart of E."""

    times: np.ndarray
    states: np.ndarray
    chart: str
    base_dim: int
    ok: bool = True
    error: Optional[str] = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        states = np.array(self.states, dtype=float)
        if len(times) != len(states):
            raise ValueError("times and states must have the same length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def x(self) -> np.ndarray:
        return self.states[:, : self.base_dim]

    @property
    def w(self) -> np.ndarray:
        return self.states[:, self.base_dim:]


def admissibility_defect(bundle: AnchoredBundleSpec, c: BundleCurve) -> Defect:
    """max over interior times of |dx/dt - rho_U(x) w|, dx/dt by central differences on the curve's grid."""
    if len(c.times) < 3:
        raise ValueError("admissibility needs at least 3 samples")
    t, x, w = c.times, c.x, c.w
    xdot = (x[2:] - x[:-2]) / (t[2:] - t[:-2])[:, None]

    def residuals():
        for i in range(1, len(t) - 1):
            r = xdot[i - 1] - bundle.rho(c.chart, x[i]) @ w[i]
            yield np.max(np.abs(r), initial=0.0), np.concatenate([[t[i]], c.states[i]])

    return max_defect(residuals())


def integrate_semispray(S: SemisprayLocal, start, t_span, steps: int, chart: Optional[str] = None) -> BundleCurve:
    chart = chart or S.bundle.default_chart
    start = np.asarray(start, dtype=float)
    n = S.bundle.base_dim + S.bundle.fibre_dim
    if start.shape != (n,):
        raise ValueError(f"start point must have length {n}")
    traj = rk4_integrate(S.field(chart), start, t_span, steps)
    return BundleCurve(traj.times, traj.states, chart, S.bundle.base_dim, traj.ok, traj.error)


def fibre_samples(bundle: AnchoredBundleSpec, chart: str, n: int = 64, seed: int = 0,
                  radius=(0.5, 2.0)) -> np.ndarray:
    """Points (x, v) with x from the chart box and |v| uniform in `radius`."""
    rng = np.random.default_rng(seed)
    xs = sample_points(bundle, chart, n, seed)
    if len(xs) == 1 and n > 1:
        xs = np.repeat(xs, n, axis=0)
    k = bundle.fibre_dim
    dirs = rng.normal(size=(n, k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = rng.uniform(radius[0], radius[1], size=(n, 1))
    return np.hstack([xs, dirs * r])


def _check_lambdas(lambdas):
    lambdas = [float(lam) for lam in lambdas]
    if not lambdas or any(lam <= 0 for lam in lambdas):
        raise ValueError("homothety factors must be positive")
    return lambdas


def _check_off_zero_section(samples, m):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    norms = np.linalg.norm(samples[:, m:], axis=1)
    if np.any(norms < ZERO_SECTION_RADIUS):
        raise ValueError(f"fibre samples must satisfy |v| >= {ZERO_SECTION_RADIUS} (zero section removed)")
    return samples


def spray_defect(S: SemisprayLocal, lambdas: Sequence[float] = DEFAULT_LAMBDAS, samples=None,
                 chart: Optional[str] = None, n: int = 64, seed: int = 0) -> Defect:
    """max |G(x, lam v) - lam^2 G(x, v)| over samples and factors."""
    chart = chart or S.bundle.default_chart
    m = S.bundle.base_dim
    lambdas = _check_lambdas(lambdas)
    if samples is None:
        samples = fibre_samples(S.bundle, chart, n, seed)
    samples = _check_off_zero_section(samples, m)
    G = S.coefficients(chart)

    def residuals():
        for z in samples:
            x, v = z[:m], z[m:]
            g = G(z)
            for lam in lambdas:
                r = G(np.concatenate([x, lam * v])) - lam ** 2 * g
                yield np.max(np.abs(r)), z

    return max_defect(residuals())


def homothety_defect(S: SemisprayLocal, lambdas: Sequence[float] = DEFAULT_LAMBDAS, samples=None,
                     chart: Optional[str] = None, n: int = 64, seed: int = 0) -> Defect:
    """Field-level homothety law S(h_lam u) = lam (h_lam)_* S(u), compared componentwise.

    (h_lam)_* acts on (x, v; y, w) as (x, lam v; y, lam w).
    """
    chart = chart or S.bundle.default_chart
    m = S.bundle.base_dim
    lambdas = _check_lambdas(lambdas)
    if samples is None:
        samples = fibre_samples(S.bundle, chart, n, seed)
    samples = _check_off_zero_section(samples, m)
    vf = S.field(chart)

    def residuals():
        for z in samples:
            x, v = z[:m], z[m:]
            base = vf(z)
            for lam in lambdas:
                lhs = vf(np.concatenate([x, lam * v]))
                rhs = lam * np.concatenate([base[:m], lam * base[m:]])
                yield np.max(np.abs(lhs - rhs)), z

    return max_defect(residuals())


def freeze_base(G: SmoothMap, x, fibre_dim: int) -> SmoothMap:
    """v -> G(x, v) with the base point held fixed."""
    x = np.asarray(x, dtype=float)
    return SmoothMap(fibre_dim, G.cod_dim, lambda v: G(np.concatenate([x, v])))


@dataclass(frozen=True)
class EulerReport:
    residual: Defect
    estimated_degree: float
    degree_defined: bool


def euler_check(G: SmoothMap, r: float, samples) -> EulerReport:
    """Compare dG_v(v) with r G(v) and estimate the homogeneity degree.

    The degree estimate is the median of log(|G(lam v)| / |G(v)|) / log(lam)
    for lam in {2, 4}, skipping samples where |G(v)| is negligible.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if np.any(np.linalg.norm(samples, axis=1) == 0):
        raise ValueError("Euler check is only defined away from the origin")

    def residuals():
        for v in samples:
            yield np.max(np.abs(directional_derivative(G, v, v) - r * G(v))), v

    estimates = []
    for v in samples:
        g = np.linalg.norm(G(v))
        if g <= DEGENERATE_NORM:
            continue
        for lam in EULER_DEGREE_LAMBDAS:
            estimates.append(math.log(np.linalg.norm(G(lam * v)) / g) / math.log(lam))
    if estimates:
        return EulerReport(max_defect(residuals()), float(np.median(estimates)), True)
    return EulerReport(max_defect(residuals()), float("nan"), False)


def default_fibre_stencil(k: int) -> np.ndarray:
    eye = np.eye(k)
    diag = np.full(k, 1.5 / math.sqrt(k))
    return np.vstack([eye, -eye, 2.0 * eye, diag, -diag])


def transformation_defect(S: SemisprayLocal, t: TransitionMap, fibre_samples=None) -> Defect:
    """Overlap law G_psi(h(x), M(x)u) = M(x) G_phi(x,u) - 1/2 dM(x)[rho_U(x) u] u."""
    if len(t.overlap_samples) == 0:
        raise ValueError(f"transition {t.source}->{t.target} has no overlap samples")
    B = S.bundle
    Gs, Gt = S.coefficients(t.source), S.coefficients(t.target)
    us = default_fibre_stencil(B.fibre_dim) if fibre_samples is None else np.atleast_2d(fibre_samples)

    def residuals():
        for x in t.overlap_samples:
            M = t.M(x)
            hx = t.base_map(x)
            rho = B.rho(t.source, x)
            for u in us:
                lhs = Gt(np.concatenate([hx, M @ u]))
                rhs = M @ Gs(np.concatenate([x, u])) - 0.5 * t.dM(x, rho @ u) @ u
                yield np.max(np.abs(lhs - rhs)), np.concatenate([x, u])

    return max_defect(residuals())


def overlap_defects(S: SemisprayLocal, t: TransitionMap, fibre_samples=None) -> dict:
    """Both overlap laws of a semispray: the anchor one and the coefficient one."""
    return {
        "anchor": anchor_compat_defect(S.bundle, t),
        "coefficients": transformation_defect(S, t, fibre_samples),
    }


@dataclass(frozen=True)
class AnchorRecovery:
    bundle: Optional[AnchoredBundleSpec]
    homothety: Defect
    linearity: Optional[Defect]
    spray: Optional[Defect]

    @property
    def anchored(self) -> bool:
        return self.bundle is not None


def recover_anchor(S0: Mapping[str, SmoothMap], base_dim: int, fibre_dim: int,
                   sample_domains: Optional[Mapping] = None,
                   lambdas: Sequence[float] = DEFAULT_LAMBDAS, samples=None,
                   seed: int = 0, n: int = 32, tol: float = 1e-6) -> AnchorRecovery:
    """Rebuild an anchor from a field S0(x,v) = (S01, S02) that commutes with homotheties.

    The homothety relations S01(x, lam v) = lam S01(x, v) and
    S02(x, lam v) = lam^2 S02(x, v) are checked first; if they fail no anchor
    is claimed. Otherwise rho_U(x) is assembled from the columns S01(x, e_j)
    and the linearity residual |S01(x, v) - rho_U(x) v| is measured on random
    unit v. A nonlinear (merely positively homogeneous) S01 is rejected here.
    """
    m, k = base_dim, fibre_dim
    lambdas = _check_lambdas(lambdas)
    charts = tuple(S0)
    probe = AnchoredBundleSpec(m, k, charts, {}, sample_domains or {})

    def split(c, x, v):
        out = S0[c](np.concatenate([x, v]))
        return out[:m], out[m:]

    pts = {c: (fibre_samples(probe, c, n, seed) if samples is None else np.atleast_2d(samples))
           for c in charts}

    def hom_residuals():
        for c in charts:
            for z in pts[c]:
                x, v = z[:m], z[m:]
                a1, a2 = split(c, x, v)
                for lam in lambdas:
                    b1, b2 = split(c, x, lam * v)
                    r = max(np.max(np.abs(b1 - lam * a1), initial=0.0), np.max(np.abs(b2 - lam ** 2 * a2)))
                    yield r, z

    homothety = max_defect(hom_residuals())
    if not homothety.value <= tol:
        return AnchorRecovery(None, homothety, None, None)

    def rho_for(c):
        eye = np.eye(k)
        return lambda x: np.column_stack([split(c, x, eye[j])[0] for j in range(k)]).reshape(m, k)

    anchors = {c: rho_for(c) for c in charts}
    rng = np.random.default_rng(seed + 1)

    def lin_residuals():
        for c in charts:
            for z in pts[c]:
                x = z[:m]
                v = rng.normal(size=k)
                v /= np.linalg.norm(v)
                r = split(c, x, v)[0] - anchors[c](x) @ v
                yield np.max(np.abs(r), initial=0.0), np.concatenate([x, v])

    linearity = max_defect(lin_residuals())
    if not linearity.value <= tol:
        return AnchorRecovery(None, homothety, linearity, None)
    bundle = AnchoredBundleSpec(m, k, charts, anchors, probe.sample_domains)
    G = {c: SmoothMap(m + k, k, lambda z, c=c: -0.5 * S0[c](z)[m:]) for c in charts}
    S = build_semispray(bundle, G)
    spray = Defect.worst(spray_defect(S, lambdas, pts[c], chart=c) for c in charts)
    return AnchorRecovery(bundle, homothety, linearity, spray)


def write_trajectory_csv(curve: BundleCurve, fh) -> None:
    """Header t,x1..xm,u1..uk; values with 17 significant digits."""
    m = curve.base_dim
    k = curve.states.shape[1] - m
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t"] + [f"x{i + 1}" for i in range(m)] + [f"u{j + 1}" for j in range(k)])
    for t, row in zip(curve.times, curve.states):
        writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
