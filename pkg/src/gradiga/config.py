"""JSON problem configuration: schema, loading, and system construction.

A configuration file fully describes one boundary value problem: mesh,
material, kinematics, boundary conditions, loads, solver controls, and
the initial guess policy. Validation is strict; unknown keys are
rejected with a message naming the key, so typos fail loudly instead of
silently changing the problem.

The package ships ready-made configurations for the bar studies under
``gradiga/configs``; :func:`shipped_config` resolves them by name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .analysis import multiwell_initial_guess
from .assembly import (
    DirichletBC,
    EdgeLoad,
    FaceTraction,
    PointDirichlet,
    System,
    TorqueTraction,
    WeakNormalDerivativeBC,
)
from .material import MultiwellGradient1d, ToupinQuadratic
from .mesh import box_patch
from .solver import NewtonConfig

__all__ = [
    "ConfigError",
    "SCHEMA",
    "load_config",
    "validate_config",
    "build_system",
    "BuiltProblem",
    "shipped_config",
    "list_shipped_configs",
]


class ConfigError(ValueError):
    """Invalid or inconsistent problem configuration."""


def _no_extra(properties, required=()):
    return {
        "type": "object",
        "properties": properties,
        "required": list(required),
        "additionalProperties": False,
    }


_NUMBER = {"type": "number"}
_VECTOR = {"type": "array", "items": _NUMBER, "minItems": 1, "maxItems": 3}
_COMPONENTS = {
    "type": "array",
    "items": {"type": "integer", "minimum": 0, "maximum": 2},
    "minItems": 1,
    "uniqueItems": True,
}
_FACE = {"type": "string", "pattern": "^[xyz](min|max)$"}

SCHEMA = _no_extra(
    {
        "name": {"type": "string"},
        "mesh": _no_extra(
            {
                "degree": {"type": "integer", "minimum": 1, "maximum": 5},
                "elements": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                    "maxItems": 3,
                },
                "lows": _VECTOR,
                "highs": _VECTOR,
            },
            required=("degree", "elements", "lows", "highs"),
        ),
        "material": {
            "oneOf": [
                _no_extra(
                    {
                        "model": {"const": "toupin"},
                        "lam": {"type": "number", "minimum": 0},
                        "mu": {"type": "number", "exclusiveMinimum": 0},
                        "length": {"type": "number", "minimum": 0},
                    },
                    required=("model", "lam", "mu", "length"),
                ),
                _no_extra(
                    {
                        "model": {"const": "multiwell"},
                        "mu": {"type": "number", "exclusiveMinimum": 0},
                        "length": {"type": "number", "exclusiveMinimum": 0},
                    },
                    required=("model", "mu", "length"),
                ),
            ]
        },
        "kinematics": {"enum": ["finite", "small"]},
        "boundary": _no_extra(
            {
                "dirichlet": {
                    "type": "array",
                    "items": _no_extra(
                        {
                            "face": _FACE,
                            "components": _COMPONENTS,
                            "value": {
                                "anyOf": [_NUMBER, _VECTOR],
                            },
                        },
                        required=("face", "components"),
                    ),
                },
                "weak_normal": {
                    "type": "array",
                    "items": _no_extra(
                        {
                            "face": _FACE,
                            "value": {"anyOf": [_NUMBER, _VECTOR]},
                            "penalty": {
                                "type": "number",
                                "exclusiveMinimum": 0,
                            },
                            "components": _COMPONENTS,
                        },
                        required=("face",),
                    ),
                },
                "point": {
                    "type": "array",
                    "items": _no_extra(
                        {
                            "location": _VECTOR,
                            "components": _COMPONENTS,
                            "value": {"anyOf": [_NUMBER, _VECTOR]},
                        },
                        required=("location", "components"),
                    ),
                },
            }
        ),
        "loads": _no_extra(
            {
                "tractions": {
                    "type": "array",
                    "items": _no_extra(
                        {"face": _FACE, "vector": _VECTOR},
                        required=("face", "vector"),
                    ),
                },
                "torques": {
                    "type": "array",
                    "items": _no_extra(
                        {
                            "face": _FACE,
                            "moment_density": _NUMBER,
                        },
                        required=("face", "moment_density"),
                    ),
                },
                "edges": {
                    "type": "array",
                    "items": _no_extra(
                        {
                            "faces": {
                                "type": "array",
                                "items": _FACE,
                                "minItems": 2,
                                "maxItems": 2,
                            },
                            "vector": _VECTOR,
                        },
                        required=("faces", "vector"),
                    ),
                },
            }
        ),
        "solver": _no_extra(
            {
                "load_steps": {"type": "integer", "minimum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
                "tol_rel": {"type": "number", "exclusiveMinimum": 0},
                "tol_abs": {"type": "number", "exclusiveMinimum": 0},
                "max_bisections": {"type": "integer", "minimum": 0},
            }
        ),
        "initial_guess": {"enum": ["zero", "multiwell_interface"]},
    },
    required=("mesh", "material"),
)


def validate_config(cfg: dict) -> dict:
    """Check a configuration dict against the schema and cross-field rules.

    Raises ConfigError with a message naming the offending key or value.
    """
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"configuration invalid at {path}: {err.message}") from err
    mesh = cfg["mesh"]
    dim = len(mesh["elements"])
    if not (len(mesh["lows"]) == len(mesh["highs"]) == dim):
        raise ConfigError(
            "mesh: elements, lows, and highs must have the same length"
        )
    if cfg["material"]["model"] == "multiwell" and dim != 1:
        raise ConfigError("material: the multiwell model is one-dimensional")
    if cfg["material"]["model"] == "multiwell" and (
        cfg.get("kinematics", "finite") == "finite"
    ):
        raise ConfigError(
            "kinematics: the multiwell model requires 'small'"
        )
    if cfg.get("initial_guess") == "multiwell_interface" and dim != 1:
        raise ConfigError("initial_guess: the interface seed is one-dimensional")
    return cfg


def load_config(path) -> dict:
    """Read and validate a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON: {err}") from err
    return validate_config(cfg)


@dataclass
class BuiltProblem:
    """A configured system ready to solve."""

    name: str
    system: System
    newton: NewtonConfig
    initial: np.ndarray | None


def build_system(cfg: dict, n_threads: int | None = None) -> BuiltProblem:
    """Construct the discrete problem a validated configuration describes."""
    mesh = cfg["mesh"]
    patch = box_patch(
        mesh["degree"], mesh["elements"], mesh["lows"], mesh["highs"]
    )

    mat_cfg = cfg["material"]
    if mat_cfg["model"] == "toupin":
        material = ToupinQuadratic(
            lam=mat_cfg["lam"], mu=mat_cfg["mu"], length=mat_cfg["length"]
        )
    else:
        material = MultiwellGradient1d(
            mu=mat_cfg["mu"], length=mat_cfg["length"]
        )

    boundary = cfg.get("boundary", {})
    dirichlet = [
        DirichletBC(d["face"], tuple(d["components"]), d.get("value", 0.0))
        for d in boundary.get("dirichlet", [])
    ]
    weak = [
        WeakNormalDerivativeBC(
            w["face"],
            w.get("value", 0.0),
            w.get("penalty", 5.0),
            tuple(w["components"]) if "components" in w else None,
        )
        for w in boundary.get("weak_normal", [])
    ]
    points = [
        PointDirichlet(
            tuple(p["location"]), tuple(p["components"]), p.get("value", 0.0)
        )
        for p in boundary.get("point", [])
    ]

    loads_cfg = cfg.get("loads", {})
    loads = [
        FaceTraction(t["face"], tuple(t["vector"]))
        for t in loads_cfg.get("tractions", [])
    ]
    loads += [
        TorqueTraction(t["face"], t["moment_density"])
        for t in loads_cfg.get("torques", [])
    ]
    edges = [
        EdgeLoad(tuple(e["faces"]), tuple(e["vector"]))
        for e in loads_cfg.get("edges", [])
    ]

    system = System(
        patch,
        material,
        finite=(cfg.get("kinematics", "finite") == "finite"),
        dirichlet=dirichlet,
        weak=weak,
        loads=loads,
        edge_loads=edges,
        points=points,
        n_threads=n_threads,
    )

    solver_cfg = cfg.get("solver", {})
    newton = NewtonConfig(
        tol_rel=solver_cfg.get("tol_rel", 1e-10),
        tol_abs=solver_cfg.get("tol_abs", 1e-12),
        max_iter=solver_cfg.get("max_iter", 50),
        load_steps=solver_cfg.get("load_steps", 10),
        max_bisections=solver_cfg.get("max_bisections", 5),
    )

    initial = None
    if cfg.get("initial_guess", "zero") == "multiwell_interface":
        initial = multiwell_initial_guess(patch)

    return BuiltProblem(cfg.get("name", "problem"), system, newton, initial)


def list_shipped_configs() -> list:
    """Names of the configuration files bundled with the package."""
    root = resources.files("gradiga") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def shipped_config(name: str) -> dict:
    """Load a bundled configuration by its file stem."""
    root = resources.files("gradiga") / "configs"
    path = root / f"{name}.json"
    if not path.is_file():
        raise ConfigError(
            f"no shipped configuration named '{name}'; available: "
            + ", ".join(list_shipped_configs())
        )
    return validate_config(json.loads(path.read_text(encoding="utf-8")))