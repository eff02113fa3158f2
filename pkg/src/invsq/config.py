"""Potential documents (JSON).

    {
      "dimension": 3,
      "angular": {"kind": "constant", "parameters": {"value": -5}},
      "radial":  {"kind": "log_power", "parameters": {"C": 1.0, "p": 2.5}, "sign": "minus"},
      "interior": {"r0": 1.0, "coupling": "ramp", "w": 0.0}
    }

Angular kinds and their parameters:

    constant      value
    hemisphere    epsilon in (0, 0.01], parity 'even' | 'odd'
    axisymmetric  breaks (0 .. pi), coeffs (one list per piece, lowest power first)
    spectral      shifts (added to the degree-l eigenvalue l(l+1), l = 0, 1, ...)

Radial kinds: zero; log_power (C, p), giving t = C (1 + ln r)^-p; table
(s, T), linear in s = ln r.  ``sign`` picks the envelope V_- ('minus',
the default, more attractive) or V_+ ('plus').  ``radial`` and
``interior`` are optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import SpecError
from .ladder import InteriorModel
from .potential import RadialPerturbation, SpherePotential

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["angular"],
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "minimum": 3},
        "angular": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "hemisphere", "axisymmetric", "spectral"]},
                "parameters": {"type": "object"},
            },
            "allOf": [
                {"if": {"properties": {"kind": {"const": "constant"}}},
                 "then": {"required": ["parameters"], "properties": {"parameters": {
                     "required": ["value"], "additionalProperties": False,
                     "properties": {"value": _NUM}}}}},
                {"if": {"properties": {"kind": {"const": "hemisphere"}}},
                 "then": {"required": ["parameters"], "properties": {"parameters": {
                     "required": ["epsilon", "parity"], "additionalProperties": False,
                     "properties": {"epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.01},
                                    "parity": {"enum": ["even", "odd"]}}}}}},
                {"if": {"properties": {"kind": {"const": "axisymmetric"}}},
                 "then": {"required": ["parameters"], "properties": {"parameters": {
                     "required": ["breaks", "coeffs"], "additionalProperties": False,
                     "properties": {"breaks": _NUMS,
                                    "coeffs": {"type": "array", "items": _NUMS, "minItems": 1}}}}}},
                {"if": {"properties": {"kind": {"const": "spectral"}}},
                 "then": {"required": ["parameters"], "properties": {"parameters": {
                     "required": ["shifts"], "additionalProperties": False,
                     "properties": {"shifts": _NUMS}}}}},
            ],
        },
        "radial": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["zero", "log_power", "table"]},
                "sign": {"enum": ["minus", "plus"]},
                "parameters": {"type": "object"},
            },
            "allOf": [
                {"if": {"properties": {"kind": {"const": "log_power"}}},
                 "then": {"required": ["parameters"], "properties": {"parameters": {
                     "required": ["C", "p"], "additionalProperties": False,
                     "properties": {"C": _NUM, "p": {"type": "number", "exclusiveMinimum": 1}}}}}},
                {"if": {"properties": {"kind": {"const": "table"}}},
                 "then": {"required": ["parameters"], "properties": {"parameters": {
                     "required": ["s", "T"], "additionalProperties": False,
                     "properties": {"s": _NUMS, "T": _NUMS}}}}},
            ],
        },
        "interior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r0": {"type": "number", "exclusiveMinimum": 0},
                "coupling": {"enum": ["ramp", "zero"]},
                "w": _NUM,
            },
        },
    },
}


@dataclass(frozen=True)
class PotentialSpec:
    potential: SpherePotential
    radial: RadialPerturbation = field(default_factory=RadialPerturbation.zero)
    interior: InteriorModel = field(default_factory=InteriorModel)
    document: dict = field(default_factory=dict, compare=False)

    @property
    def dimension(self):
        return self.potential.dimension


def _path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def parse_spec(doc: dict) -> PotentialSpec:
    """Validate a decoded document and build the model objects."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        # the deepest error is usually the informative one
        err = max(errors, key=lambda e: len(list(e.absolute_path)))
        raise SpecError(err.message, field=_path(err))
    dim = int(doc.get("dimension", 3))
    ang = doc["angular"]
    kind, par = ang["kind"], ang.get("parameters", {})
    if kind == "constant":
        pot = SpherePotential.constant(par["value"], dim)
    else:
        if dim != 3:
            raise SpecError("non-constant P is only supported on S^2 (d = 3)", field="dimension")
        if kind == "hemisphere":
            pot = SpherePotential.hemisphere(par["epsilon"], par["parity"])
        elif kind == "axisymmetric":
            if len(par["breaks"]) != len(par["coeffs"]) + 1:
                raise SpecError("need len(breaks) == len(coeffs) + 1", field="angular.parameters.breaks")
            pot = SpherePotential.axisymmetric(par["breaks"], par["coeffs"])
        else:
            pot = SpherePotential.spectral(par["shifts"])

    rad = doc.get("radial", {"kind": "zero"})
    sign = -1 if rad.get("sign", "minus") == "minus" else 1
    rpar = rad.get("parameters", {})
    if rad["kind"] == "zero":
        radial = RadialPerturbation(sign=sign)
    elif rad["kind"] == "log_power":
        radial = RadialPerturbation.log_power(rpar["C"], rpar["p"], sign)
    else:
        if len(rpar["s"]) != len(rpar["T"]):
            raise SpecError("'s' and 'T' must have the same length", field="radial.parameters")
        radial = RadialPerturbation.from_table(rpar["s"], rpar["T"], sign)

    ipar = doc.get("interior", {})
    interior = InteriorModel(r0=float(ipar.get("r0", 1.0)), coupling=ipar.get("coupling", "ramp"),
                             w=float(ipar.get("w", 0.0)))
    return PotentialSpec(pot, radial, interior, doc)


def load_spec(path: str | Path) -> PotentialSpec:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise SpecError("top level must be an object", line=1)
    return parse_spec(doc)


def spec_to_document(spec: PotentialSpec) -> dict:
    """Canonical document (used in run manifests)."""
    return json.loads(json.dumps(spec.document, sort_keys=True))
