"""Lie algebroid morphisms, defined by compatibility of form pullback with d.

A morphism is a bundle map over a base map f0 with fibre matrices F(x). It
is a morphism of algebroids when d_source(f* w) = f*(d_target w) for every
target form w; here that is checked on a finite probe set at sample points.
Source and target are each restricted to a single chart.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .algebroid import (
    AlgebroidStructure,
    FormLocal,
    dual_frame_form,
    exterior_derivative_components,
    function_form,
    multi_indices,
)
from .bundle import Defect, as_points, max_defect, sample_points
from .numerics import SmoothMap, jacobian, linear_map


@dataclass(frozen=True)
class MorphismLocal:
    source: AlgebroidStructure
    target: AlgebroidStructure
    base_map: SmoothMap
    fibre_map: Callable[[np.ndarray], np.ndarray]
    source_chart: Optional[str] = None
    target_chart: Optional[str] = None

    def __post_init__(self):
        if self.source_chart is None:
            object.__setattr__(self, "source_chart", self.source.bundle.default_chart)
        if self.target_chart is None:
            object.__setattr__(self, "target_chart", self.target.bundle.default_chart)
        sb, tb = self.source.bundle, self.target.bundle
        if self.base_map.dom_dim != sb.base_dim or self.base_map.cod_dim != tb.base_dim:
            raise ValueError(
                f"base map must go R^{sb.base_dim} -> R^{tb.base_dim}, "
                f"got R^{self.base_map.dom_dim} -> R^{self.base_map.cod_dim}"
            )

    def F(self, x) -> np.ndarray:
        F = np.asarray(self.fibre_map(np.asarray(x, dtype=float)), dtype=float)
        shape = (self.target.bundle.fibre_dim, self.source.bundle.fibre_dim)
        if F.shape != shape:
            raise ValueError(f"fibre map has shape {F.shape}, expected {shape}")
        return F


def identity_morphism(A: AlgebroidStructure, chart: Optional[str] = None) -> MorphismLocal:
    eye = np.eye(A.bundle.fibre_dim)
    eye.setflags(write=False)
    return MorphismLocal(A, A, linear_map(np.eye(A.bundle.base_dim)), lambda x: eye, chart, chart)


def pullback_form(phi: MorphismLocal, omega: FormLocal) -> FormLocal:
    """(f* w)_x(e_I) = w_{f0(x)}(F(x) e_I) on the source chart."""
    k_src, k_tgt = phi.source.bundle.fibre_dim, phi.target.bundle.fibre_dim
    if omega.fibre_dim != k_tgt:
        raise ValueError("form does not live on the target bundle")
    q = omega.degree
    if q > k_src:
        raise ValueError(f"cannot pull back a degree-{q} form to fibre dimension {k_src}")
    src_idx = multi_indices(k_src, q)
    tgt_idx = multi_indices(k_tgt, q)
    tchart = phi.target_chart

    def comps(x):
        w = omega.values(tchart, phi.base_map(x))
        if q == 0:
            return w
        F = phi.F(x)
        out = np.zeros(len(src_idx))
        for n, I in enumerate(src_idx):
            cols = F[:, list(I)]
            out[n] = sum(wJ * np.linalg.det(cols[list(J), :]) for wJ, J in zip(w, tgt_idx) if wJ != 0.0)
        return out

    return FormLocal(q, k_src, {phi.source_chart: comps})


def dual_frame_probes(A: AlgebroidStructure) -> list:
    """Coordinate functions, the constant 1, and the dual coframe: the default degree 0/1 probes."""
    m = A.bundle.base_dim
    probes = [function_form(A.bundle, lambda y: 1.0)]
    probes += [function_form(A.bundle, lambda y, i=i: y[i]) for i in range(m)]
    probes += [dual_frame_form(A.bundle, g) for g in range(A.bundle.fibre_dim)]
    return probes


def morphism_defect(phi: MorphismLocal, test_forms: Sequence[FormLocal], samples=None,
                    n: int = 32, seed: int = 0) -> Defect:
    """max |components of d_source(f* w) - f*(d_target w)| over probes and samples."""
    if not test_forms:
        raise ValueError("morphism check needs probe forms (at least degrees 0 and 1)")
    k_src, k_tgt = phi.source.bundle.fibre_dim, phi.target.bundle.fibre_dim
    if samples is None:
        samples = sample_points(phi.source.bundle, phi.source_chart, n, seed)
    samples = as_points(samples, phi.source.bundle.base_dim)
    chart = phi.source_chart
    defects = []
    for w in test_forms:
        if w.degree + 1 > min(k_src, k_tgt):
            raise ValueError(f"probe of degree {w.degree} is too high for fibre dimensions {k_src}, {k_tgt}")
        lhs = exterior_derivative_components(phi.source, pullback_form(phi, w))
        rhs = pullback_form(phi, exterior_derivative_components(phi.target, w))
        defects.append(max_defect(
            (np.max(np.abs(lhs.values(chart, x) - rhs.values(chart, x))), x) for x in samples
        ))
    return Defect.worst(defects)


def compose(phi2: MorphismLocal, phi1: MorphismLocal) -> MorphismLocal:
    """phi2 after phi1: base f0_2 o f0_1, fibre x -> F_2(f0_1(x)) F_1(x)."""
    t1, s2 = phi1.target.bundle, phi2.source.bundle
    if (t1.base_dim, t1.fibre_dim) != (s2.base_dim, s2.fibre_dim):
        raise ValueError("target of the first morphism does not match the source of the second")
    if phi1.target_chart != phi2.source_chart:
        raise ValueError("morphisms meet on different charts")
    f1, f2 = phi1.base_map, phi2.base_map

    def chain(x):
        return jacobian(f2, f1(x)) @ jacobian(f1, x)

    analytic = f1.analytic_jacobian is not None and f2.analytic_jacobian is not None
    base = SmoothMap(f1.dom_dim, f2.cod_dim, lambda x: f2(f1(x)), chain if analytic else None)
    return MorphismLocal(
        phi1.source, phi2.target, base,
        lambda x: phi2.F(f1(x)) @ phi1.F(x),
        phi1.source_chart, phi2.target_chart,
    )
