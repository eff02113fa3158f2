import json

import pytest

from invsq.config import load_spec, parse_spec, spec_to_document
from invsq.errors import SpecError

SPECS = __import__("pathlib").Path(__file__).resolve().parents[1] / "specs"


@pytest.mark.parametrize("name", sorted(p.name for p in SPECS.glob("*.json")))
def test_shipped_specs_load(name):
    spec = load_spec(SPECS / name)
    assert spec.dimension == 3
    assert spec_to_document(spec) == json.loads((SPECS / name).read_text())


def test_defaults():
    spec = parse_spec({"angular": {"kind": "constant", "parameters": {"value": -5}}})
    assert spec.radial.kind == "zero" and spec.radial.sign == -1
    assert spec.interior.r0 == 1.0


def test_radial_kinds():
    base = {"angular": {"kind": "constant", "parameters": {"value": -1}}}
    lp = parse_spec({**base, "radial": {"kind": "log_power", "parameters": {"C": 2, "p": 3}, "sign": "plus"}})
    assert (lp.radial.C, lp.radial.p, lp.radial.sign) == (2.0, 3.0, 1)
    tb = parse_spec({**base, "radial": {"kind": "table", "parameters": {"s": [0, 1, 2], "T": [1, 0.5, 0.2]}}})
    assert tb.radial.kind == "tabulated"


@pytest.mark.parametrize("doc, field", [
    ({"angular": {"kind": "constant"}}, "angular"),
    ({"angular": {"kind": "constant", "parameters": {"value": "x"}}}, "angular.parameters.value"),
    ({"angular": {"kind": "hemisphere", "parameters": {"epsilon": 0.2, "parity": "even"}}},
     "angular.parameters.epsilon"),
    ({"angular": {"kind": "constant", "parameters": {"value": 1}},
      "radial": {"kind": "log_power", "parameters": {"C": 1, "p": 0.5}}}, "radial.parameters.p"),
    ({"angular": {"kind": "blob"}}, "angular.kind"),
    ({"angular": {"kind": "constant", "parameters": {"value": 1}}, "extra": 1}, "<root>"),
    ({"angular": {"kind": "constant", "parameters": {"value": 1}},
      "radial": {"kind": "table", "parameters": {"s": [0, 1], "T": [1]}}}, "radial.parameters"),
])
def test_malformed_documents_name_the_field(doc, field):
    with pytest.raises(SpecError) as exc:
        parse_spec(doc)
    assert exc.value.field == field


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "angular": {\n    "kind": "constant",,\n  }\n}\n')
    with pytest.raises(SpecError) as exc:
        load_spec(p)
    assert exc.value.line == 3
