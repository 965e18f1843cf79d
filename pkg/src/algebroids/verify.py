"""Runs every applicable defect check on a loaded spec and formats the report."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

from . import algebroid as alg
from .bundle import Defect, anchor_compat_defect, cocycle_defect, sample_points
from .morphism import dual_frame_probes, morphism_defect
from .numerics import EXACT_TOL, FD_TOL, NESTED_TOL, SmoothMap
from .semispray import euler_check, fibre_samples, freeze_base, spray_defect, transformation_defect
from .specfile import LoadedSpec

TIERS = {"exact": EXACT_TOL, "fd": FD_TOL, "nested": NESTED_TOL}

# Nested finite differences are the expensive part; they get fewer points.
NESTED_SAMPLE_CAP = 16


@dataclass(frozen=True)
class CheckResult:
    name: str
    defect: Defect
    tol: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.defect.value) and self.defect.value <= self.tol

    def line(self) -> str:
        at = "-" if self.defect.at is None else "(" + ",".join(f"{v:.6g}" for v in self.defect.at) + ")"
        verdict = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} max_defect={self.defect.value:.6e} tol={self.tol:.1e} at={at} {verdict}"


class _Runner:
    def __init__(self, spec: LoadedSpec, samples: int, seed, tol_scale: float):
        self.spec = spec
        self.n = samples
        self.seed = spec.seed if seed is None else seed
        self.tol_scale = tol_scale
        self.results = []

    def tol(self, check: str, tier: str) -> float:
        t = self.spec.tolerances.get(check, self.spec.tolerances.get(tier, TIERS[tier]))
        return t * self.tol_scale

    def add(self, name, check, tier, defect):
        self.results.append(CheckResult(name, defect, self.tol(check, tier)))

    def points(self, chart, cap=None):
        n = self.n if cap is None else min(self.n, cap)
        return sample_points(self.spec.bundle, chart, n, self.seed)


def _coordinate_functions(m):
    return [SmoothMap(m, 1, lambda x, i=i: [x[i]]) for i in range(m)]


def run_checks(spec: LoadedSpec, samples: int = 64, seed=None, tol_scale: float = 1.0,
               include_morphism: bool = True) -> list:
    r = _Runner(spec, samples, seed, tol_scale)
    B = spec.bundle
    m, k = B.base_dim, B.fibre_dim
    fd = "fd" if m else "exact"
    nested = "nested" if m else "exact"

    for t in B.transitions:
        tag = f"{t.source}->{t.target}"
        r.add(f"anchor_compat[{tag}]", "anchor_compat", "fd", anchor_compat_defect(B, t))
        for name, s in spec.sections.items():
            if t.source in s.maps and t.target in s.maps:
                r.add(f"cocycle[{name}:{tag}]", "cocycle", "exact", cocycle_defect(B, s, t))
        S = spec.semispray
        if S is not None and t.source in S.G and t.target in S.G:
            r.add(f"transformation[{tag}]", "transformation", "fd", transformation_defect(S, t))

    if spec.semispray is not None:
        S = spec.semispray
        for chart in S.G:
            pts = fibre_samples(B, chart, r.n, r.seed)
            r.add(f"spray[{chart}]", "spray", "exact", spray_defect(S, samples=pts, chart=chart))
            G = S.coefficients(chart)
            euler = Defect.worst(
                Defect(euler_check(freeze_base(G, z[:m], k), 2.0, [z[m:]]).residual.value, tuple(z))
                for z in pts
            )
            r.add(f"euler[{chart}]", "euler", "fd", euler)

    if spec.algebroid is not None:
        A = spec.algebroid
        for chart in B.charts:
            named = [s for s in spec.sections.values() if chart in s.maps]
            secs = A.frame() + named
            pts = r.points(chart)
            few = r.points(chart, NESTED_SAMPLE_CAP)
            pairs = list(combinations(secs, 2))
            r.add(f"bracket_antisymmetry[{chart}]", "bracket_antisymmetry", "exact", Defect.worst(
                alg.antisymmetry_defect(A, s1, s2, pts, chart) for s1, s2 in pairs))
            fns = _coordinate_functions(m) or [SmoothMap(0, 1, lambda x: [2.0])]
            r.add(f"leibniz[{chart}]", "leibniz", fd, Defect.worst(
                alg.leibniz_defect(A, s1, s2, f, pts, chart)
                for s1 in secs for s2 in secs for f in fns))
            r.add(f"jacobi[{chart}]", "jacobi", nested, Defect.worst(
                alg.jacobi_defect(A, s1, s2, s3, few, chart) for s1, s2, s3 in combinations(secs, 3)))
            if m:
                r.add(f"anchor_hom[{chart}]", "anchor_hom", "fd", Defect.worst(
                    alg.anchor_hom_defect(A, s1, s2, pts, chart) for s1, s2 in pairs))
            for name, w in _d2_probes(spec):
                if chart in w.components:
                    r.add(f"d_squared[{name}:{chart}]", "d_squared", nested,
                          alg.d_squared_defect(A, w, few, chart))

    if include_morphism and spec.morphism is not None:
        r.results.extend(morphism_checks(spec, samples, seed, tol_scale))
    return r.results


def _d2_probes(spec: LoadedSpec):
    B = spec.bundle
    k = B.fibre_dim
    probes = []
    if k >= 2:
        probes += [(f"x{i + 1}", alg.function_form(B, lambda y, i=i: y[i])) for i in range(B.base_dim)]
    if k >= 3:
        probes += [(f"theta{g + 1}", alg.dual_frame_form(B, g)) for g in range(k)]
    probes += [(name, w) for name, w in spec.forms.items() if w.degree + 2 <= k]
    return probes


def morphism_checks(spec: LoadedSpec, samples: int = 64, seed=None, tol_scale: float = 1.0) -> list:
    phi = spec.morphism
    if phi is None:
        raise ValueError(f"{spec.name} has no morphism block")
    r = _Runner(spec, samples, seed, tol_scale)
    target = spec.morphism_target
    kmin = min(phi.source.bundle.fibre_dim, phi.target.bundle.fibre_dim)
    probes = [("frame", w) for w in dual_frame_probes(phi.target) if w.degree + 1 <= kmin]
    probes += [(name, w) for name, w in target.forms.items() if w.degree + 1 <= kmin]
    tier = "fd" if (phi.source.bundle.base_dim or phi.target.bundle.base_dim) else "exact"
    pts = r.points(phi.source_chart, NESTED_SAMPLE_CAP)
    tname = target.name
    r.add(f"morphism[{tname}:frame]", "morphism", tier,
          morphism_defect(phi, [w for n, w in probes if n == "frame"], pts))
    for name, w in probes:
        if name != "frame":
            r.add(f"morphism[{tname}:{name}]", "morphism", tier, morphism_defect(phi, [w], pts))
    return r.results


def format_report(results) -> str:
    lines = [res.line() for res in results]
    failed = sum(not res.passed for res in results)
    lines.append(f"SUMMARY checks={len(results)} failed={failed} {'PASS' if failed == 0 else 'FAIL'}")
    return "\n".join(lines) + "\n"
