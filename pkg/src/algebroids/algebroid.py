"""Lie algebroid structures in a local frame and their exterior calculus.

The bracket of the frame sections is [e_a, e_b] = sum_g C[g, a, b](x) e_g.
For arbitrary sections the Leibniz rule forces

    [s1, s2]^g = C[g, a, b] s1^a s2^b + (rho s1)^i d_i s2^g - (rho s2)^i d_i s1^g.

Forms of degree q store one component per strictly increasing q-tuple of
frame indices (0-based), in ``itertools.combinations`` order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .bundle import (
    AnchoredBundleSpec,
    ChartError,
    Defect,
    SectionLocal,
    anchor_apply,
    as_points,
    frame_section,
    max_defect,
    sample_points,
    scale_section,
)
from .numerics import SmoothMap, directional_derivative, jacobian

StructureFn = Callable[[np.ndarray], np.ndarray]


def antisymmetrize(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    return 0.5 * (C - np.swapaxes(C, 1, 2))


@dataclass(frozen=True)
class AlgebroidStructure:
    bundle: AnchoredBundleSpec
    C: Mapping[str, StructureFn]

    def __post_init__(self):
        k = self.bundle.fibre_dim
        wrapped = {}
        for chart, fn in self.C.items():
            if chart not in self.bundle.charts:
                raise ChartError(f"structure functions given on unknown chart {chart!r}")

            def anti(x, fn=fn, chart=chart):
                T = np.asarray(fn(np.asarray(x, dtype=float)), dtype=float)
                if T.shape != (k, k, k):
                    raise ValueError(f"structure functions on chart {chart!r} must have shape {(k, k, k)}")
                return antisymmetrize(T)

            wrapped[chart] = anti
        for chart in self.bundle.charts:
            wrapped.setdefault(chart, lambda x: np.zeros((k, k, k)))
        object.__setattr__(self, "C", wrapped)

    def structure(self, chart: str, x) -> np.ndarray:
        return self.C[chart](x)

    def frame(self) -> list:
        return [frame_section(self.bundle, a) for a in range(self.bundle.fibre_dim)]


def constant_structure(bundle: AnchoredBundleSpec, table) -> AlgebroidStructure:
    table = np.array(table, dtype=float)
    table.setflags(write=False)
    return AlgebroidStructure(bundle, {c: (lambda x: table) for c in bundle.charts})


def _chart(A: AlgebroidStructure, chart: Optional[str], *sections) -> str:
    chart = chart or A.bundle.default_chart
    for s in sections:
        if chart not in s.maps:
            raise ChartError(f"section is not defined on chart {chart!r}")
    return chart


def bracket_value(A: AlgebroidStructure, chart: str, s1: SmoothMap, s2: SmoothMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    a, b = s1(x), s2(x)
    out = np.einsum("gab,a,b->g", A.structure(chart, x), a, b)
    if A.bundle.base_dim:
        rho = A.bundle.rho(chart, x)
        out = out + jacobian(s2, x) @ (rho @ a) - jacobian(s1, x) @ (rho @ b)
    return out


def bracket(A: AlgebroidStructure, s1: SectionLocal, s2: SectionLocal, chart: Optional[str] = None) -> SectionLocal:
    """Bracket of two sections, returned on the chart it was computed in."""
    chart = _chart(A, chart, s1, s2)
    m1, m2 = s1.on(chart), s2.on(chart)
    m, k = A.bundle.base_dim, A.bundle.fibre_dim
    return SectionLocal({chart: SmoothMap(m, k, lambda x: bracket_value(A, chart, m1, m2, x))})


def _samples(A, chart, samples, n=64, seed=0):
    if samples is None:
        return sample_points(A.bundle, chart, n, seed)
    return as_points(samples, A.bundle.base_dim)


def antisymmetry_defect(A: AlgebroidStructure, s1, s2, samples=None, chart=None) -> Defect:
    chart = _chart(A, chart, s1, s2)
    m1, m2 = s1.on(chart), s2.on(chart)
    return max_defect(
        (np.max(np.abs(bracket_value(A, chart, m1, m2, x) + bracket_value(A, chart, m2, m1, x))), x)
        for x in _samples(A, chart, samples)
    )


def leibniz_defect(A: AlgebroidStructure, s1, s2, f: SmoothMap, samples=None, chart=None) -> Defect:
    """|[s1, f s2] - f [s1, s2] - (rho(s1) f) s2| over samples."""
    chart = _chart(A, chart, s1, s2)
    m1, m2 = s1.on(chart), s2.on(chart)
    fs2 = scale_section(f, s2).on(chart)
    X = anchor_apply(A.bundle, SectionLocal({chart: m1})).on(chart)

    def residuals():
        for x in _samples(A, chart, samples):
            lhs = bracket_value(A, chart, m1, fs2, x)
            df = directional_derivative(f, x, X(x))[0] if A.bundle.base_dim else 0.0
            rhs = f(x)[0] * bracket_value(A, chart, m1, m2, x) + df * m2(x)
            yield np.max(np.abs(lhs - rhs)), x

    return max_defect(residuals())


def jacobi_defect(A: AlgebroidStructure, s1, s2, s3, samples=None, chart=None) -> Defect:
    chart = _chart(A, chart, s1, s2, s3)
    b12, b23, b31 = bracket(A, s1, s2, chart), bracket(A, s2, s3, chart), bracket(A, s3, s1, chart)
    terms = [
        (b12.on(chart), s3.on(chart)),
        (b23.on(chart), s1.on(chart)),
        (b31.on(chart), s2.on(chart)),
    ]

    def residuals():
        for x in _samples(A, chart, samples):
            total = sum(bracket_value(A, chart, p, q, x) for p, q in terms)
            yield np.max(np.abs(total)), x

    return max_defect(residuals())


def vector_field_bracket(X: SmoothMap, Y: SmoothMap, x) -> np.ndarray:
    """Jacobi-Lie bracket [X, Y] = DY X - DX Y at x."""
    return jacobian(Y, x) @ X(x) - jacobian(X, x) @ Y(x)


def anchor_hom_defect(A: AlgebroidStructure, s1, s2, samples=None, chart=None) -> Defect:
    """|rho([s1, s2]) - [rho s1, rho s2]| over samples; needs a base of positive dimension."""
    if A.bundle.base_dim < 1:
        raise ValueError("anchor homomorphism check needs base_dim >= 1")
    chart = _chart(A, chart, s1, s2)
    m1, m2 = s1.on(chart), s2.on(chart)
    X = anchor_apply(A.bundle, SectionLocal({chart: m1})).on(chart)
    Y = anchor_apply(A.bundle, SectionLocal({chart: m2})).on(chart)

    def residuals():
        for x in _samples(A, chart, samples):
            lhs = A.bundle.rho(chart, x) @ bracket_value(A, chart, m1, m2, x)
            yield np.max(np.abs(lhs - vector_field_bracket(X, Y, x))), x

    return max_defect(residuals())


def multi_indices(k: int, q: int) -> list:
    return list(combinations(range(k), q))


def permutation_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class FormLocal:
    """A degree-q form; ``components[chart](x)`` returns the C(k, q) stored components."""

    degree: int
    fibre_dim: int
    components: Mapping[str, Callable[[np.ndarray], np.ndarray]]
    top_overflow: bool = field(default=False, compare=False)

    @cached_property
    def indices(self) -> list:
        return multi_indices(self.fibre_dim, self.degree)

    def values(self, chart: str, x) -> np.ndarray:
        try:
            fn = self.components[chart]
        except KeyError:
            raise ChartError(f"form is not defined on chart {chart!r}") from None
        out = np.asarray(fn(np.asarray(x, dtype=float)), dtype=float).reshape(-1)
        if out.size != len(self.indices):
            raise ValueError(f"form of degree {self.degree} needs {len(self.indices)} components, got {out.size}")
        return out

    def component(self, chart: str, x, index) -> float:
        """Value on an arbitrary index tuple; repeated indices give 0."""
        index = tuple(index)
        if len(set(index)) != len(index):
            return 0.0
        ordered = tuple(sorted(index))
        return permutation_sign(index) * self.values(chart, x)[self.indices.index(ordered)]

    def evaluate(self, chart: str, x, vectors: Sequence) -> float:
        """omega_x(v_1, ..., v_q) = sum over increasing I of omega_I det(V[I, :])."""
        if len(vectors) != self.degree:
            raise ValueError(f"degree-{self.degree} form needs {self.degree} arguments, got {len(vectors)}")
        vals = self.values(chart, x)
        if self.degree == 0:
            return float(vals[0])
        V = np.column_stack(vectors)
        return float(sum(w * np.linalg.det(V[list(I), :]) for w, I in zip(vals, self.indices) if w != 0.0))


def make_form(bundle: AnchoredBundleSpec, degree: int, terms: Mapping, charts=None) -> FormLocal:
    """Form from {increasing 0-based multi-index: x -> float}; missing indices are 0.

    The same local expressions are used on every listed chart.
    """
    k = bundle.fibre_dim
    idx = multi_indices(k, degree)
    for key in terms:
        key = tuple(key)
        if key not in idx:
            raise ValueError(f"{key} is not a strictly increasing {degree}-index in range {k}")
    ordered = [(idx.index(tuple(key)), fn) for key, fn in terms.items()]

    def comps(x):
        out = np.zeros(len(idx))
        for pos, fn in ordered:
            out[pos] = fn(x)
        return out

    charts = bundle.charts if charts is None else tuple(charts)
    return FormLocal(degree, k, {c: comps for c in charts})


def dual_frame_form(bundle: AnchoredBundleSpec, gamma: int) -> FormLocal:
    return make_form(bundle, 1, {(gamma,): lambda x: 1.0})


def function_form(bundle: AnchoredBundleSpec, f: Callable[[np.ndarray], float]) -> FormLocal:
    return make_form(bundle, 0, {(): f})


def zero_form(bundle: AnchoredBundleSpec, degree: int, overflow: bool = False) -> FormLocal:
    n = len(multi_indices(bundle.fibre_dim, degree))
    return FormLocal(degree, bundle.fibre_dim, {c: (lambda x: np.zeros(n)) for c in bundle.charts}, overflow)


def exterior_derivative_eval(A: AlgebroidStructure, omega: FormLocal, sections: Sequence[SectionLocal],
                             x, chart: Optional[str] = None) -> float:
    """(d omega)(s_0, ..., s_q) at x by the Cartan formula.

    sum_i (-1)^i rho(s_i)(omega(.. s_i omitted ..))
      + sum_{i<j} (-1)^(i+j) omega([s_i, s_j], .. s_i, s_j omitted ..)
    """
    q = omega.degree
    if len(sections) != q + 1:
        raise ValueError(f"d of a degree-{q} form takes {q + 1} sections, got {len(sections)}")
    chart = _chart(A, chart, *sections)
    x = np.asarray(x, dtype=float)
    maps = [s.on(chart) for s in sections]
    m = A.bundle.base_dim
    total = 0.0
    if m:
        rho = A.bundle.rho(chart, x)
        for i, si in enumerate(maps):
            rest = maps[:i] + maps[i + 1:]
            g = SmoothMap(m, 1, lambda y, rest=rest: [omega.evaluate(chart, y, [r(y) for r in rest])])
            total += (-1) ** i * directional_derivative(g, x, rho @ si(x))[0]
    values = [s(x) for s in maps]
    for i, j in combinations(range(q + 1), 2):
        b = bracket_value(A, chart, maps[i], maps[j], x)
        rest = [v for n, v in enumerate(values) if n not in (i, j)]
        total += (-1) ** (i + j) * omega.evaluate(chart, x, [b] + rest)
    return total


def exterior_derivative_components(A: AlgebroidStructure, omega: FormLocal) -> FormLocal:
    """d omega as a degree q+1 form, components taken on frame sections.

    For q = fibre_dim the result is the (empty) zero form of degree q+1,
    flagged ``top_overflow``.
    """
    k = A.bundle.fibre_dim
    q = omega.degree
    if q >= k:
        return zero_form(A.bundle, q + 1, overflow=True)
    frame = A.frame()
    idx = multi_indices(k, q + 1)
    charts = [c for c in A.bundle.charts if c in omega.components]

    def comps_for(chart):
        def comps(x):
            return np.array([
                exterior_derivative_eval(A, omega, [frame[a] for a in I], x, chart) for I in idx
            ])
        return comps

    return FormLocal(q + 1, k, {c: comps_for(c) for c in charts})


def d_squared_defect(A: AlgebroidStructure, omega: FormLocal, samples=None, chart: Optional[str] = None) -> Defect:
    """max |components of d(d omega)| over samples."""
    if omega.degree + 2 > A.bundle.fibre_dim:
        raise ValueError("d^2 check needs degree + 2 <= fibre_dim")
    chart = chart or A.bundle.default_chart
    dd = exterior_derivative_components(A, exterior_derivative_components(A, omega))
    return max_defect((np.max(np.abs(dd.values(chart, x))), x) for x in _samples(A, chart, samples))

