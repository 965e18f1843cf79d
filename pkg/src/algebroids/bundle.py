"""Anchored vector bundles in local representation.

A bundle is described chart by chart: each chart carries an anchor matrix
function x -> rho_U(x) (shape base_dim x fibre_dim) and a sampling box, and
overlaps are described by transitions (h, M) with explicit sample points.
Chart identifiers are plain strings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .numerics import SmoothMap, constant_map, directional_derivative, jacobian

Matrix = Callable[[np.ndarray], np.ndarray]


class ChartError(LookupError):
    """An object is not defined on the chart an operation needs."""


@dataclass(frozen=True)
class Defect:
    """Max-norm residual of an identity over a sample set, with its argmax."""

    value: float
    at: Optional[tuple] = None

    def __float__(self):
        return float(self.value)

    @classmethod
    def worst(cls, defects) -> "Defect":
        best = cls(0.0)
        for d in defects:
            if d.value > best.value or (np.isnan(d.value) and not np.isnan(best.value)):
                best = d
        return best


def max_defect(residuals) -> Defect:
    """Reduce an iterable of (norm, point) pairs to a Defect."""
    worst = Defect(0.0)
    for value, point in residuals:
        value = float(value)
        if np.isnan(value) or value > worst.value:
            worst = Defect(value, tuple(float(p) for p in np.ravel(point)))
            if np.isnan(value):
                break
    return worst


@dataclass(frozen=True)
class TransitionMap:
    """Overlap data from chart `source` to chart `target`.

    ``base_map`` is h = psi o phi^-1 and ``fibre_map`` is x -> M(x); both are
    expressed in the source chart's coordinates.
    """

    source: str
    target: str
    base_map: SmoothMap
    fibre_map: Matrix
    overlap_samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.overlap_samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, self.base_map.dom_dim)
        samples.setflags(write=False)
        object.__setattr__(self, "overlap_samples", samples)

    def M(self, x) -> np.ndarray:
        return np.asarray(self.fibre_map(np.asarray(x, dtype=float)), dtype=float)

    def dM(self, x, y) -> np.ndarray:
        """Derivative of x -> M(x) in the base direction y (entrywise central differences)."""
        x = np.asarray(x, dtype=float)
        k = self.M(x).shape[0]
        if x.size == 0:
            return np.zeros((k, k))
        flat = SmoothMap(x.size, k * k, lambda z: self.M(z).reshape(-1))
        return directional_derivative(flat, x, y).reshape(k, k)


@dataclass(frozen=True)
class AnchoredBundleSpec:
    base_dim: int
    fibre_dim: int
    charts: tuple
    anchor: Mapping[str, Matrix]
    sample_domains: Mapping[str, tuple] = field(default_factory=dict)
    transitions: tuple = ()

    def __post_init__(self):
        if self.base_dim < 0 or self.fibre_dim < 1:
            raise ValueError("need base_dim >= 0 and fibre_dim >= 1")
        charts = tuple(self.charts)
        if len(set(charts)) != len(charts):
            raise ValueError("chart names must be unique")
        object.__setattr__(self, "charts", charts)
        object.__setattr__(self, "transitions", tuple(self.transitions))
        for t in self.transitions:
            for name in (t.source, t.target):
                if name not in charts:
                    raise ValueError(f"transition refers to unknown chart {name!r}")
        domains = {}
        for c in charts:
            box = self.sample_domains.get(c, ((-1.0, 1.0),) * self.base_dim)
            box = tuple((float(lo), float(hi)) for lo, hi in box)
            if len(box) != self.base_dim:
                raise ValueError(f"chart {c!r}: domain box needs {self.base_dim} intervals")
            domains[c] = box
        object.__setattr__(self, "sample_domains", domains)

    @property
    def default_chart(self) -> str:
        return self.charts[0]

    def rho(self, chart: str, x) -> np.ndarray:
        """Anchor matrix rho_U(x), shape (base_dim, fibre_dim)."""
        if self.base_dim == 0:
            return np.zeros((0, self.fibre_dim))
        try:
            A = self.anchor[chart]
        except KeyError:
            raise ChartError(f"no anchor data for chart {chart!r}") from None
        R = np.asarray(A(np.asarray(x, dtype=float)), dtype=float)
        if R.shape != (self.base_dim, self.fibre_dim):
            raise ValueError(
                f"anchor on chart {chart!r} has shape {R.shape}, "
                f"expected {(self.base_dim, self.fibre_dim)}"
            )
        return R

    def check_anchor_shape(self, samples_per_chart: int = 4, seed: int = 0):
        for c in self.charts:
            for x in sample_points(self, c, samples_per_chart, seed):
                self.rho(c, x)

    def transitions_between(self, source: str, target: str):
        return [t for t in self.transitions if t.source == source and t.target == target]


def sample_points(bundle: AnchoredBundleSpec, chart: str, n: int = 64, seed: int = 0) -> np.ndarray:
    """Uniform points from the chart's box; a point base yields a single empty point."""
    if bundle.base_dim == 0:
        return np.zeros((1, 0))
    box = np.array(bundle.sample_domains[chart], dtype=float)
    rng = np.random.default_rng(seed)
    return rng.uniform(box[:, 0], box[:, 1], size=(n, bundle.base_dim))


def as_points(samples, base_dim: int) -> np.ndarray:
    """Coerce user samples to shape (n, base_dim); a point base always yields one empty point."""
    if base_dim == 0:
        return np.zeros((1, 0))
    return np.atleast_2d(np.asarray(samples, dtype=float)).reshape(-1, base_dim)


@dataclass(frozen=True)
class SectionLocal:
    """Local representatives s_phi: R^m -> R^k, keyed by chart."""

    maps: Mapping[str, SmoothMap]

    def on(self, chart: str) -> SmoothMap:
        try:
            return self.maps[chart]
        except KeyError:
            raise ChartError(f"section is not defined on chart {chart!r}") from None

    @property
    def charts(self):
        return tuple(self.maps)


@dataclass(frozen=True)
class VectorFieldLocal:
    """Local representatives X_phi: R^m -> R^m, keyed by chart."""

    maps: Mapping[str, SmoothMap]

    def on(self, chart: str) -> SmoothMap:
        try:
            return self.maps[chart]
        except KeyError:
            raise ChartError(f"vector field is not defined on chart {chart!r}") from None

    @property
    def charts(self):
        return tuple(self.maps)


def section(chart_maps: Mapping[str, SmoothMap]) -> SectionLocal:
    return SectionLocal(dict(chart_maps))


def frame_section(bundle: AnchoredBundleSpec, alpha: int) -> SectionLocal:
    """The constant local frame section e_alpha on every chart (0-based alpha)."""
    e = np.zeros(bundle.fibre_dim)
    e[alpha] = 1.0
    return SectionLocal({c: constant_map(bundle.base_dim, e) for c in bundle.charts})


def scale_section(f: SmoothMap, s: SectionLocal) -> SectionLocal:
    """Pointwise product f*s for a scalar function f on the base (same map on every chart)."""

    def build(sm: SmoothMap) -> SmoothMap:
        return SmoothMap(sm.dom_dim, sm.cod_dim, lambda x: f(x)[0] * sm(x))

    return SectionLocal({c: build(sm) for c, sm in s.maps.items()})


def anchor_apply(bundle: AnchoredBundleSpec, s: SectionLocal) -> VectorFieldLocal:
    maps = {}
    for chart, sm in s.maps.items():
        if chart not in bundle.charts:
            raise ChartError(f"section chart {chart!r} is not a chart of the bundle")
        if sm.dom_dim != bundle.base_dim or sm.cod_dim != bundle.fibre_dim:
            raise ValueError(f"section on chart {chart!r} has the wrong dimensions")
        maps[chart] = SmoothMap(
            bundle.base_dim, bundle.base_dim,
            lambda x, chart=chart, sm=sm: bundle.rho(chart, x) @ sm(x),
        )
    return VectorFieldLocal(maps)


def cocycle_defect(
    bundle: AnchoredBundleSpec,
    obj: Union[SectionLocal, VectorFieldLocal],
    t: Optional[TransitionMap] = None,
) -> Defect:
    """Overlap consistency of a section (via M(x)) or a vector field (via dh(x)).

    With ``t=None`` every registered transition is checked; a bundle without
    transitions has defect 0.
    """
    if t is None:
        return Defect.worst(cocycle_defect(bundle, obj, tr) for tr in bundle.transitions)
    if len(t.overlap_samples) == 0:
        raise ValueError(f"transition {t.source}->{t.target} has no overlap samples")
    src, dst = obj.on(t.source), obj.on(t.target)

    def residuals():
        for x in t.overlap_samples:
            if isinstance(obj, SectionLocal):
                expected = t.M(x) @ src(x)
            else:
                expected = jacobian(t.base_map, x) @ src(x)
            yield np.max(np.abs(dst(t.base_map(x)) - expected), initial=0.0), x

    return max_defect(residuals())


def anchor_compat_defect(bundle: AnchoredBundleSpec, t: Optional[TransitionMap] = None) -> Defect:
    """Entrywise max of rho_V(h(x)) M(x) - dh(x) rho_U(x) over overlap samples."""
    if t is None:
        return Defect.worst(anchor_compat_defect(bundle, tr) for tr in bundle.transitions)
    if len(t.overlap_samples) == 0:
        raise ValueError(f"transition {t.source}->{t.target} has no overlap samples")

    def residuals():
        for x in t.overlap_samples:
            lhs = bundle.rho(t.target, t.base_map(x)) @ t.M(x)
            rhs = jacobian(t.base_map, x) @ bundle.rho(t.source, x)
            yield np.max(np.abs(lhs - rhs), initial=0.0), x

    return max_defect(residuals())


def tensor_anchor(A: Matrix, dim: int, domain: Optional[Sequence] = None, chart: str = "U") -> AnchoredBundleSpec:
    """Single-chart bundle with fibre = base dimension and anchor given by a (1,1)-tensor."""
    domains = {chart: tuple(domain)} if domain is not None else {}
    return AnchoredBundleSpec(dim, dim, (chart,), {chart: A}, domains)


def identity_anchor(dim: int) -> Matrix:
    eye = np.eye(dim)
    eye.setflags(write=False)
    return lambda x: eye
