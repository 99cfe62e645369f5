"""JSON experiment configuration: schema, loading, and object builders."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .flow import FlowConfig
from .geometry import AngleProfile, SupportCurve, build_angle, build_domain
from .meshing import TriMesh, generate_mesh
from .operators import ForcingModel, ScalarField
from .translator import TranslatorOptions

SCHEMA_VERSION = 1

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

_SHAPE = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"shape": {"const": "circle"}, "R": _POSITIVE},
            "required": ["shape", "R"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"shape": {"const": "ellipse"}, "a": _POSITIVE,
                           "b": _POSITIVE},
            "required": ["shape", "a", "b"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "shape": {"const": "support"},
                "h0": _POSITIVE,
                "fourier": {
                    "type": "array",
                    "items": {"type": "array", "minItems": 3, "maxItems": 3,
                              "items": _NUMBER},
                },
            },
            "required": ["shape", "h0"],
            "additionalProperties": False,
        },
    ]
}

_ALPHA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"const": {"type": "number", "exclusiveMinimum": 0,
                                     "exclusiveMaximum": math.pi}},
            "required": ["const"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "fourier": {
                    "type": "object",
                    "properties": {
                        "c0": _NUMBER,
                        "terms": {"type": "array",
                                  "items": {"type": "array", "minItems": 3,
                                            "maxItems": 3, "items": _NUMBER}},
                    },
                    "required": ["c0"],
                    "additionalProperties": False,
                }
            },
            "required": ["fourier"],
            "additionalProperties": False,
        },
    ]
}

_FORCING = {
    "oneOf": [
        {"type": "object", "properties": {"kind": {"const": "zero"}},
         "required": ["kind"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "const"}, "value": _NUMBER},
         "required": ["kind", "value"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "linear_x1"}, "value": _NUMBER},
         "required": ["kind"], "additionalProperties": False},
        {"type": "object",
         "properties": {
             "kind": {"const": "polynomial"},
             "terms": {"type": "array",
                       "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                 "items": _NUMBER}},
             "p_linear": {"type": "array", "minItems": 2, "maxItems": 2,
                          "items": _NUMBER},
         },
         "required": ["kind", "terms"], "additionalProperties": False},
    ]
}

_INITIAL = {
    "oneOf": [
        {"type": "object", "properties": {"kind": {"const": "zero"}},
         "required": ["kind"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "const"}, "value": _NUMBER},
         "required": ["kind", "value"], "additionalProperties": False},
        {"type": "object",
         "properties": {"kind": {"const": "affine"},
                        "coeffs": {"type": "array", "minItems": 3,
                                   "maxItems": 3, "items": _NUMBER}},
         "required": ["kind", "coeffs"], "additionalProperties": False},
        {"type": "object",
         "properties": {
             "kind": {"const": "polynomial"},
             "terms": {"type": "array",
                       "items": {"type": "array", "minItems": 3, "maxItems": 3,
                                 "items": _NUMBER}},
         },
         "required": ["kind", "terms"], "additionalProperties": False},
        {"type": "object", "properties": {"kind": {"const": "translator"}},
         "required": ["kind"], "additionalProperties": False},
    ]
}

_AUDIT_NAMES = [
    "geometry", "assumptions", "gradient_bound", "ut_extremes",
    "energy_identity", "mass_law", "oscillation", "convergence",
    "boundary_trace", "conjecture35",
]

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "msflow experiment configuration",
    "type": "object",
    "properties": {
        "shape": _SHAPE,
        "alpha": _ALPHA,
        "H": _FORCING,
        "mesh": {
            "type": "object",
            "properties": {"h": _POSITIVE},
            "required": ["h"],
            "additionalProperties": False,
        },
        "flow": {
            "type": "object",
            "properties": {
                "dt": _POSITIVE,
                "t_end": {"type": "number", "minimum": 0},
                "picard_iters": {"type": "integer", "minimum": 1, "maximum": 5},
                "linear_tol": {"type": "number", "exclusiveMinimum": 0,
                               "maximum": 1e-6},
                "linear_solver": {"enum": ["lu", "cg"]},
                "snapshot_every": {"type": "integer", "minimum": 1},
                "stagnation_threshold": {
                    "oneOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
            },
            "required": ["dt", "t_end"],
            "additionalProperties": False,
        },
        "initial": _INITIAL,
        "oscillation_initial_b": _INITIAL,
        "translator": {
            "type": "object",
            "properties": {
                "tol": _POSITIVE,
                "max_iter": {"type": "integer", "minimum": 1},
                "epsilons": {"type": "array", "items": _POSITIVE},
            },
            "additionalProperties": False,
        },
        "audits": {"type": "array", "items": {"enum": _AUDIT_NAMES}},
        "prior_run": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "snapshot_files": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
    "required": ["shape", "alpha", "mesh"],
    "additionalProperties": False,
}


@dataclass
class ExperimentConfig:
    """Validated experiment description with lazy object builders."""

    raw: dict
    path: str | None = None
    _curve: SupportCurve | None = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def mesh_h(self) -> float:
        return float(self.raw["mesh"]["h"])

    @property
    def audits(self) -> list[str]:
        return list(self.raw.get("audits", []))

    @property
    def epsilons(self) -> list[float]:
        return [float(e) for e in
                self.raw.get("translator", {}).get("epsilons", [])]

    @property
    def output_dir(self) -> str | None:
        return self.raw.get("output_dir")

    @property
    def prior_run(self) -> str | None:
        return self.raw.get("prior_run")

    def run_id(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    def build_curve(self) -> SupportCurve:
        if self._curve is None:
            self._curve = build_domain(self.raw["shape"])
        return self._curve

    def build_alpha(self) -> AngleProfile:
        return build_angle(self.raw["alpha"])

    def build_model(self) -> ForcingModel:
        spec = self.raw.get("H", {"kind": "zero"})
        kind = spec["kind"]
        if kind == "zero":
            return ForcingModel.zero()
        if kind == "const":
            return ForcingModel.constant(spec["value"])
        if kind == "linear_x1":
            return ForcingModel.linear_x1(spec.get("value", 1.0))
        return ForcingModel(spec["terms"], spec.get("p_linear"))

    def build_mesh(self, alpha: AngleProfile | None = None) -> TriMesh:
        return generate_mesh(self.build_curve(), self.mesh_h,
                             alpha or self.build_alpha(), seed=self.seed)

    def flow_config(self) -> FlowConfig:
        spec = dict(self.raw.get("flow", {}))
        if "dt" not in spec:
            raise ConfigError("config has no 'flow' section with dt and t_end")
        return FlowConfig(
            dt=spec["dt"],
            t_end=spec["t_end"],
            picard_iters=spec.get("picard_iters", 1),
            linear_tol=spec.get("linear_tol", 1e-10),
            linear_solver=spec.get("linear_solver", "lu"),
            snapshot_every=spec.get("snapshot_every", 20),
            stagnation_threshold=spec.get("stagnation_threshold", 1e-12),
        )

    def translator_options(self) -> TranslatorOptions:
        spec = self.raw.get("translator", {})
        return TranslatorOptions(
            tol=spec.get("tol", 1e-10),
            max_iter=spec.get("max_iter", 200),
        )

    def initial_spec(self, key: str = "initial") -> dict:
        return self.raw.get(key, {"kind": "zero"})

    def build_initial(self, mesh: TriMesh, spec: dict | None = None,
                      translator_values=None) -> ScalarField:
        spec = spec if spec is not None else self.initial_spec()
        kind = spec["kind"]
        pts = mesh.nodes
        if kind == "zero":
            return ScalarField.zeros(mesh)
        if kind == "const":
            return ScalarField(mesh, [spec["value"]] * mesh.n_nodes)
        if kind == "affine":
            c0, cx, cy = spec["coeffs"]
            return ScalarField(mesh, c0 + cx * pts[:, 0] + cy * pts[:, 1])
        if kind == "polynomial":
            vals = 0.0 * pts[:, 0]
            for i, j, c in spec["terms"]:
                vals = vals + c * pts[:, 0] ** int(i) * pts[:, 1] ** int(j)
            return ScalarField(mesh, vals)
        if kind == "translator":
            if translator_values is None:
                raise ConfigError(
                    "initial data 'translator' requested but no translator "
                    "solution was provided")
            return ScalarField(mesh, translator_values)
        raise ConfigError(f"unknown initial data kind {kind!r}")


def validate_config(raw: dict) -> None:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    # finiteness beyond what the schema can express
    def walk(node, trail):
        if isinstance(node, dict):
            for k, v in node.items():
                walk(v, trail + (str(k),))
        elif isinstance(node, (list, tuple)):
            for i, v in enumerate(node):
                walk(v, trail + (str(i),))
        elif isinstance(node, float) and not math.isfinite(node):
            raise ConfigError(
                f"invalid config at {'/'.join(trail)}: non-finite number")
    walk(raw, ())


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    validate_config(raw)
    return ExperimentConfig(raw=raw, path=str(path))
