"""JSON configuration documents for IFS, random models, disintegration plans and scans."""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import jsonschema

from .ek import Annulus
from .ifs import IFS, Similarity, as_fraction
from .model import Bernoulli, Explicit, Markov, Model
from .disintegrate import DisintegrationPlan


class ConfigError(ValueError):
    """Invalid configuration; the message names the location of the problem."""


_NUMBER = {"anyOf": [{"type": "number"}, {"type": "string"}]}
_COMPLEX = {"anyOf": [_NUMBER, {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}]}
_PROB = {"anyOf": [{"type": "number"}, {"type": "string"}]}

IFS_SCHEMA = {
    "type": "object",
    "required": ["maps", "probs"],
    "properties": {
        "maps": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "object", "required": ["lambda", "t"],
                      "properties": {"lambda": _COMPLEX, "t": _COMPLEX}},
        },
        "probs": {"type": "array", "minItems": 1, "items": _PROB},
    },
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["systems", "selection"],
    "properties": {
        "systems": {"type": "object", "minProperties": 1, "additionalProperties": IFS_SCHEMA},
        "selection": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["bernoulli", "markov", "explicit"]},
                "q": {"type": "object", "additionalProperties": _PROB},
                "states": {"type": "array"},
                "matrix": {"type": "array", "items": {"type": "array", "items": _PROB}},
                "sequence": {"type": "array", "minItems": 1},
                "seed": {"type": "integer"},
            },
        },
        "prefix": {"type": "array"},
    },
}

PLAN_SCHEMA = {
    "type": "object",
    "required": ["translations", "probs", "betas"],
    "properties": {
        "translations": {"type": "array", "minItems": 1, "items": _COMPLEX},
        "probs": {"type": "array", "minItems": 1, "items": _PROB},
        "betas": {"type": "array", "minItems": 1, "items": _COMPLEX},
        "r": {"type": "integer", "minimum": 2},
        "s": {"type": "integer", "minimum": 2},
        "lambda": _COMPLEX,
    },
}

SCAN_SCHEMA = {
    "type": "object",
    "properties": {
        "annulus": {"type": "object", "required": ["a", "b", "eta"],
                    "properties": {"a": {"type": "number"}, "b": {"type": "number"}, "eta": {"type": "number"}}},
        "betas": {"type": "object", "additionalProperties": _COMPLEX},
        "q1": _PROB,
        "M": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "delta": {"type": "number", "minimum": 0, "maximum": 1},
        "draws": {"type": "integer", "minimum": 1},
        "quantifier": {"enum": ["min", "max"]},
    },
}


def load_json(path) -> dict:
    """Read a JSON document; syntax errors become ConfigError with line and column."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return doc


def _validate(doc: dict, schema: dict, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {what} at {where}: {exc.message}") from exc


def parse_real(v) -> float:
    if isinstance(v, str):
        return float(Fraction(v.strip()))
    return float(v)


def parse_complex(v) -> complex:
    """A number, an exact-rational string, a Python complex literal or a [re, im] pair."""
    if isinstance(v, (list, tuple)):
        return complex(parse_real(v[0]), parse_real(v[1]))
    if isinstance(v, str):
        try:
            return complex(parse_real(v))
        except (ValueError, ZeroDivisionError):
            return complex(v.replace(" ", ""))
    return complex(v)


def _guard(fn, what: str):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def ifs_from_dict(doc: dict) -> IFS:
    _validate(doc, IFS_SCHEMA, "IFS")

    def build():
        maps = tuple(Similarity(parse_complex(m["lambda"]), parse_complex(m["t"])) for m in doc["maps"])
        return IFS(maps, tuple(as_fraction(p) for p in doc["probs"]))

    return _guard(build, "IFS")


def _selection(sel: dict):
    seed = int(sel.get("seed", 0))
    kind = sel["kind"]
    if kind == "bernoulli":
        if "q" not in sel:
            raise ConfigError("bernoulli selection needs q")
        return Bernoulli(sel["q"], seed)
    if kind == "markov":
        if "states" not in sel or "matrix" not in sel:
            raise ConfigError("markov selection needs states and matrix")
        return Markov(tuple(sel["states"]), tuple(tuple(r) for r in sel["matrix"]), seed)
    if "sequence" not in sel:
        raise ConfigError("explicit selection needs sequence")
    return Explicit(tuple(sel["sequence"]), seed)


def model_from_dict(doc: dict, seed: int | None = None) -> Model:
    """A model document; a bare IFS document becomes the one-system model with that IFS."""
    if "maps" in doc:
        ifs = ifs_from_dict(doc)
        return Model({"A": ifs}, Bernoulli({"A": Fraction(1)}, 0 if seed is None else seed))
    _validate(doc, MODEL_SCHEMA, "model")
    sel = dict(doc["selection"])
    if seed is not None:
        sel["seed"] = seed

    def build():
        systems = {k: ifs_from_dict(v) for k, v in doc["systems"].items()}
        return Model(systems, _selection(sel))

    return _guard(build, "model")


def plan_from_dict(doc: dict) -> tuple[DisintegrationPlan, complex | None]:
    _validate(doc, PLAN_SCHEMA, "plan")

    def build():
        plan = DisintegrationPlan(
            tuple(parse_complex(t) for t in doc["translations"]),
            tuple(as_fraction(p) for p in doc["probs"]),
            tuple(parse_complex(b) for b in doc["betas"]),
            int(doc.get("r", 2)),
            doc.get("s"),
        )
        lam = parse_complex(doc["lambda"]) if "lambda" in doc else None
        return plan, lam

    return _guard(build, "plan")


def scan_from_dict(doc: dict) -> dict:
    """Scan settings with defaults: A(1.1, 2, 0.05), beta = 1 on both symbols, rho 0.1, delta 0.2."""
    _validate(doc, SCAN_SCHEMA, "scan")
    ann = doc.get("annulus", {"a": 1.1, "b": 2.0, "eta": 0.05})

    def build():
        betas = {int(k): parse_complex(v) for k, v in doc.get("betas", {"1": 1, "2": 1}).items()}
        return {
            "annulus": Annulus(float(ann["a"]), float(ann["b"]), float(ann["eta"])),
            "betas": {k: (int(v.real) if v.imag == 0 and v.real == int(v.real) else v) for k, v in betas.items()},
            "q1": as_fraction(doc.get("q1", "5/6")),
            "M": [int(m) for m in doc.get("M", [8, 12, 16])],
            "rho": float(doc.get("rho", 0.1)),
            "delta": float(doc.get("delta", 0.2)),
            "draws": int(doc.get("draws", 1)),
            "quantifier": doc.get("quantifier", "min"),
        }

    return _guard(build, "scan")


def measure_source(doc: dict) -> str:
    """Which kind of document this is: 'ifs', 'model' or 'plan'."""
    if "maps" in doc:
        return "ifs"
    if "systems" in doc:
        return "model"
    if "translations" in doc and "betas" in doc:
        return "plan"
    raise ConfigError("config is neither an IFS (maps), a model (systems) nor a plan (translations, betas)")
