"""JSON spec files: schema validation and assembly into verifiable objects.

Formulas are strings in the `expr` grammar. Structure-function entries are
given for alpha < beta only; the opposite entries follow by antisymmetry and
absent entries are zero. All indices in files are 1-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .algebroid import AlgebroidStructure, FormLocal, multi_indices
from .bundle import AnchoredBundleSpec, SectionLocal, TransitionMap
from .expr import ExprError, compile_expr, parse_expression, to_source, variables
from .morphism import MorphismLocal
from .numerics import SmoothMap
from .semispray import SemisprayLocal, build_semispray

TOLERANCE_KEYS = (
    "exact", "fd", "nested",
    "cocycle", "anchor_compat", "transformation", "spray", "euler",
    "bracket_antisymmetry", "leibniz", "jacobi", "anchor_hom", "d_squared", "morphism",
)

_EXPR = {"type": "string", "minLength": 1}
_EXPR_LIST = {"type": "array", "items": _EXPR}
_EXPR_MATRIX = {"type": "array", "items": _EXPR_LIST}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["base_dim", "fibre_dim", "charts"],
    "properties": {
        "base_dim": {"type": "integer", "minimum": 0},
        "fibre_dim": {"type": "integer", "minimum": 1},
        "charts": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False, "required": ["name"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "domain": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
        "transitions": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False,
                "required": ["from", "to", "h", "M", "samples"],
                "properties": {
                    "from": {"type": "string"},
                    "to": {"type": "string"},
                    "h": _EXPR_LIST,
                    "M": _EXPR_MATRIX,
                    "samples": {"type": "array", "minItems": 1, "items": {"type": "array", "items": {"type": "number"}}},
                },
            },
        },
        "anchor": {"type": "object", "additionalProperties": _EXPR_MATRIX},
        "structure": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["gamma", "alpha", "beta", "expr"],
                    "properties": {
                        "gamma": {"type": "integer", "minimum": 1},
                        "alpha": {"type": "integer", "minimum": 1},
                        "beta": {"type": "integer", "minimum": 1},
                        "expr": _EXPR,
                    },
                },
            },
        },
        "semispray": {"type": "object", "additionalProperties": _EXPR_LIST},
        "forms": {
            "type": "object",
            "additionalProperties": {
                "type": "object", "additionalProperties": False, "required": ["degree", "components"],
                "properties": {
                    "degree": {"type": "integer", "minimum": 0},
                    "components": {"type": "object", "additionalProperties": _EXPR},
                },
            },
        },
        "sections": {
            "type": "object",
            "additionalProperties": {
                "oneOf": [_EXPR_LIST, {"type": "object", "additionalProperties": _EXPR_LIST}],
            },
        },
        "morphism": {
            "type": "object", "additionalProperties": False, "required": ["target", "f0", "F"],
            "properties": {"target": {"type": "string"}, "f0": _EXPR_LIST, "F": _EXPR_MATRIX},
        },
        "tolerances": {
            "type": "object",
            "propertyNames": {"enum": list(TOLERANCE_KEYS)},
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


class SpecError(ValueError):
    def __init__(self, message: str, pointer: str = ""):
        self.message = message
        self.pointer = pointer or "/"
        super().__init__(f"{self.pointer}: {message}")


def _pointer(parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


@dataclass
class LoadedSpec:
    path: Optional[Path]
    bundle: AnchoredBundleSpec
    algebroid: Optional[AlgebroidStructure] = None
    semispray: Optional[SemisprayLocal] = None
    forms: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    morphism: Optional[MorphismLocal] = None
    morphism_target: Optional["LoadedSpec"] = None
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    sources: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.path.name if self.path else "<spec>"


class _Builder:
    def __init__(self, doc, path, stack):
        self.doc = doc
        self.path = path
        self.stack = stack
        self.m = doc["base_dim"]
        self.k = doc["fibre_dim"]
        self.sources = []

    def expr(self, src, where, allow_fibre=False, base_dim=None):
        m = self.m if base_dim is None else base_dim
        try:
            node = parse_expression(src, m, self.k, allow_fibre)
        except ExprError as exc:
            raise SpecError(f"{exc.message} at offset {exc.offset} in {src!r}", _pointer(where)) from None
        self.sources.append(src)
        return node

    def vector_map(self, srcs, where, dom_dim=None):
        dom = self.m if dom_dim is None else dom_dim
        nodes = [self.expr(s, where + [i], base_dim=dom) for i, s in enumerate(srcs)]
        fns = [compile_expr(n) for n in nodes]
        zero = np.zeros((len(nodes), dom))

        def constant_jacobian(x):
            return zero

        jac = constant_jacobian if all(not variables(n) for n in nodes) else None
        return SmoothMap(dom, len(fns), lambda x: [f(x) for f in fns], jac)

    def matrix_fn(self, rows, shape, where, dom_dim=None, what="matrix"):
        if len(rows) != shape[0] or any(len(r) != shape[1] for r in rows):
            got = (len(rows), len(rows[0]) if rows else 0)
            raise SpecError(f"{what} must be {shape[0]}x{shape[1]}, got {got[0]}x{got[1]}", _pointer(where))
        dom = self.m if dom_dim is None else dom_dim
        fns = [[compile_expr(self.expr(s, where + [i, j], base_dim=dom)) for j, s in enumerate(r)]
               for i, r in enumerate(rows)]

        def build(x):
            return np.array([[f(x) for f in r] for r in fns], dtype=float).reshape(shape)

        return build

    def build(self) -> LoadedSpec:
        doc, m, k = self.doc, self.m, self.k
        charts, domains = [], {}
        for i, c in enumerate(doc["charts"]):
            name = c["name"]
            if name in charts:
                raise SpecError(f"duplicate chart name {name!r}", _pointer(["charts", i, "name"]))
            box = c.get("domain", [[-1.0, 1.0]] * m)
            if len(box) != m:
                raise SpecError(f"domain needs {m} intervals", _pointer(["charts", i, "domain"]))
            if any(lo >= hi for lo, hi in box):
                raise SpecError("domain intervals need lo < hi", _pointer(["charts", i, "domain"]))
            charts.append(name)
            domains[name] = tuple(map(tuple, box))

        anchors = {}
        for chart, rows in doc.get("anchor", {}).items():
            if chart not in charts:
                raise SpecError(f"anchor given for unknown chart {chart!r}", _pointer(["anchor", chart]))
            if m == 0:
                if rows:
                    raise SpecError(f"anchor on chart {chart!r} must be empty over a point base",
                                    _pointer(["anchor", chart]))
                continue
            anchors[chart] = self.matrix_fn(rows, (m, k), ["anchor", chart], what=f"anchor on chart {chart!r}")
        if m > 0:
            for chart in charts:
                if chart not in anchors:
                    raise SpecError(f"missing anchor for chart {chart!r}", "/anchor")

        transitions = []
        for i, t in enumerate(doc.get("transitions", [])):
            where = ["transitions", i]
            for key in ("from", "to"):
                if t[key] not in charts:
                    raise SpecError(f"unknown chart {t[key]!r}", _pointer(where + [key]))
            if len(t["h"]) != m:
                raise SpecError(f"h needs {m} components", _pointer(where + ["h"]))
            for j, p in enumerate(t["samples"]):
                if len(p) != m:
                    raise SpecError(f"sample needs {m} coordinates", _pointer(where + ["samples", j]))
            h = self.vector_map(t["h"], where + ["h"])
            M = self.matrix_fn(t["M"], (k, k), where + ["M"], what="M")
            transitions.append(TransitionMap(t["from"], t["to"], h, M, np.array(t["samples"], dtype=float).reshape(-1, m)))

        bundle = AnchoredBundleSpec(m, k, tuple(charts), anchors, domains, tuple(transitions))
        spec = LoadedSpec(self.path, bundle, tolerances=dict(doc.get("tolerances", {})), seed=doc.get("seed", 0))

        if "structure" in doc:
            C = {}
            for chart, entries in doc["structure"].items():
                if chart not in charts:
                    raise SpecError(f"structure given for unknown chart {chart!r}", _pointer(["structure", chart]))
                C[chart] = self.structure(entries, ["structure", chart])
            spec.algebroid = AlgebroidStructure(bundle, C)

        if "semispray" in doc:
            G = {}
            for chart, srcs in doc["semispray"].items():
                where = ["semispray", chart]
                if chart not in charts:
                    raise SpecError(f"semispray given for unknown chart {chart!r}", _pointer(where))
                if len(srcs) != k:
                    raise SpecError(f"semispray needs {k} coefficients", _pointer(where))
                fns = [compile_expr(self.expr(s, where + [i], allow_fibre=True)) for i, s in enumerate(srcs)]
                G[chart] = SmoothMap(m + k, k, lambda z, fns=fns: [f(z[:m], z[m:]) for f in fns])
            spec.semispray = build_semispray(bundle, G)

        for name, srcs in doc.get("sections", {}).items():
            per_chart = srcs if isinstance(srcs, dict) else {c: srcs for c in charts}
            maps = {}
            for chart, vec in per_chart.items():
                where = ["sections", name] + ([chart] if isinstance(srcs, dict) else [])
                if chart not in charts:
                    raise SpecError(f"section given for unknown chart {chart!r}", _pointer(where))
                if len(vec) != k:
                    raise SpecError(f"section needs {k} components", _pointer(where))
                maps[chart] = self.vector_map(vec, where)
            spec.sections[name] = SectionLocal(maps)

        for name, f in doc.get("forms", {}).items():
            spec.forms[name] = self.form(f, ["forms", name], bundle)

        if "morphism" in doc:
            self.morphism(doc["morphism"], spec)
        spec.sources = self.sources
        return spec

    def structure(self, entries, where):
        k = self.k
        fns = []
        seen = set()
        for i, e in enumerate(entries):
            g, a, b = e["gamma"], e["alpha"], e["beta"]
            if max(g, a, b) > k:
                raise SpecError(f"index exceeds fibre dimension {k}", _pointer(where + [i]))
            if not a < b:
                raise SpecError("entries need alpha < beta", _pointer(where + [i]))
            if (g, a, b) in seen:
                raise SpecError("duplicate structure entry", _pointer(where + [i]))
            seen.add((g, a, b))
            fns.append((g - 1, a - 1, b - 1, compile_expr(self.expr(e["expr"], where + [i, "expr"]))))

        def table(x):
            C = np.zeros((k, k, k))
            for g, a, b, f in fns:
                v = f(x)
                C[g, a, b] = v
                C[g, b, a] = -v
            return C

        return table

    def form(self, f, where, bundle):
        q, k = f["degree"], self.k
        if q > k:
            raise SpecError(f"degree {q} exceeds fibre dimension {k}", _pointer(where + ["degree"]))
        idx = multi_indices(k, q)
        terms = {}
        for key, src in f["components"].items():
            try:
                I = tuple(int(p) - 1 for p in key.split(",")) if key.strip() else ()
            except ValueError:
                raise SpecError(f"bad multi-index {key!r}", _pointer(where + ["components", key])) from None
            if I not in idx:
                raise SpecError(f"multi-index {key!r} must be {q} strictly increasing indices in 1..{k}",
                                _pointer(where + ["components", key]))
            terms[idx.index(I)] = compile_expr(self.expr(src, where + ["components", key]))

        def comps(x):
            out = np.zeros(len(idx))
            for pos, fn in terms.items():
                out[pos] = fn(x)
            return out

        return FormLocal(q, k, {c: comps for c in bundle.charts})

    def morphism(self, mdoc, spec):
        where = ["morphism"]
        target_path = Path(mdoc["target"])
        if not target_path.is_absolute():
            base = self.path.parent if self.path else Path.cwd()
            target_path = base / target_path
        target = load_spec(target_path, _stack=self.stack)
        if target.algebroid is None or spec.algebroid is None:
            raise SpecError("morphisms need a structure block in both source and target", _pointer(where))
        m2, k2 = target.bundle.base_dim, target.bundle.fibre_dim
        if len(mdoc["f0"]) != m2:
            raise SpecError(f"f0 needs {m2} components", _pointer(where + ["f0"]))
        f0 = self.vector_map(mdoc["f0"], where + ["f0"])
        F = self.matrix_fn(mdoc["F"], (k2, self.k), where + ["F"], what="F")
        spec.morphism = MorphismLocal(spec.algebroid, target.algebroid, f0, F)
        spec.morphism_target = target


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("algebroids") / "fixtures" / name))


def resolve_spec_path(path) -> Path:
    """A path as given, or the name of a built-in fixture."""
    p = Path(path)
    if p.exists():
        return p
    candidate = fixture_path(p.name)
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"spec file not found: {path}")


def load_spec_dict(doc, path: Optional[Path] = None, _stack=()) -> LoadedSpec:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SpecError(err.message, _pointer(err.absolute_path))
    return _Builder(doc, path, _stack).build()


def load_spec(path, _stack=()) -> LoadedSpec:
    p = resolve_spec_path(path).resolve()
    if p in _stack:
        raise SpecError(f"morphism targets form a cycle through {p.name}", "/morphism/target")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from None
    return load_spec_dict(doc, p, tuple(_stack) + (p,))


def roundtrip_ok(spec: LoadedSpec) -> bool:
    """Every formula in the spec reprints to text that parses to the same tree."""
    m, k = spec.bundle.base_dim, spec.bundle.fibre_dim
    for src in spec.sources:
        tree = parse_expression(src, m, k, allow_fibre=True)
        if parse_expression(to_source(tree), m, k, allow_fibre=True) != tree:
            return False
    return True
