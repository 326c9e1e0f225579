import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import generators as gen
from conftest import HIRING, MINIMAL_SPEC
from sha256_ref import sha256_hex
from aits.dsl import (
    extend,
    format_extensions,
    format_spec,
    merge,
    parse_any,
    parse_extension,
    parse_extensions,
    parse_spec,
    spec_hash,
)
from aits.dsl.model import MetricBinding, Requirement, SpecExtension, tightest
from aits.errors import DSLError, MergeError

# frozen from the pure-Python SHA-256 in sha256_ref over the canonical text
MINIMAL_HASH = "b427ee90e740eed9e04f86a5c3fa8e17c22fc8b9b293543cfd2528187957b11c"

CORE = MINIMAL_SPEC


def ext(body: str) -> str:
    return f'extension "emp" extends "s" version "1.0" {{ {body} }}'


# parsing ---------------------------------------------------------------------

def test_minimal_spec():
    spec = parse_spec(MINIMAL_SPEC)
    assert spec.name == "s" and spec.version == "1.0"
    assert spec.system_type == "classifier" and spec.risk_class == "high"
    assert len(spec.requirements) == 1
    (req,) = spec.requirements
    assert req.id == "R.1" and len(req.bindings) == 1
    assert req.bindings[0] == MetricBinding("m.a", "LE", "0.5")
    assert req.bindings[0].threshold == 0.5


def test_comments_and_whitespace_are_insignificant():
    noisy = """
    # leading comment
    sandbox   "s"
       version "1.0"   {   # trailing
      system_type    classifier
    # between
      risk_class high
      requirement R.1 {
            metric m.a<=0.5   # tight
      }
    }
    # end
    """
    assert parse_spec(noisy) == parse_spec(MINIMAL_SPEC)
    assert format_spec(parse_spec(noisy)) == format_spec(parse_spec(MINIMAL_SPEC))


def test_hiring_screener_is_high_risk():
    spec = parse_spec((HIRING / "screener.aits").read_text(encoding="utf-8"))
    assert spec.risk_class == "high"
    assert spec.system_type == "classifier"
    assert spec.requirement("AIA.Art10").label == "data governance"


def test_keywords_are_contextual():
    spec = parse_spec('sandbox "s" version "1.0" { system_type metric risk_class high '
                      'requirement requirement { metric metric >= 1 } }')
    assert spec.system_type == "metric"
    assert spec.requirements[0].bindings[0].metric_id == "metric"


def test_unbound_and_string_escapes():
    spec = parse_spec('sandbox "a \\"b\\"\\n\\\\" version "2.10.3" { system_type x risk_class minimal '
                      'requirement A.1 "l\\tx" unbound }')
    assert spec.name == 'a "b"\n\\'
    assert spec.requirements[0].unbound and spec.requirements[0].label == "l\tx"
    assert parse_spec(format_spec(spec)) == spec


HEAD = 'sandbox "s" version "1.0" { system_type a risk_class high '


@pytest.mark.parametrize("source, fragment, anchor", [
    ('sandbox "s" version "1.0" { risk_class high }', "system_type", "{ risk"),
    ('sandbox "s" version "1.0" { system_type a system_type b risk_class high }', "system_type", "system_type b"),
    ('sandbox "s" version "01.0" { system_type a risk_class high }', "version", '"01.0"'),
    ('sandbox "s" version "1.0" { system_type a risk_class severe }', "high", "severe"),
    (HEAD + "requirement R {} }", "unbound", "{}"),
    (HEAD + "\n requirement R { metric m < 1 } }", "expected", "< 1"),
    (HEAD + "requirement R { metric m <= 1 } requirement R unbound }", "duplicate", "requirement R unbound"),
    (HEAD + "requirement R { metric m <= 1 metric m >= 0 } }", "duplicate", "m >= 0"),
    (HEAD + "requirement R { metric m <= 1e999 } }", "finite", "1e999"),
    (HEAD + "}  trailing", "end of input", "trailing"),
    ('sandbox "unterminated', "string", '"unterminated'),
])
def test_errors_carry_positions(source, fragment, anchor):
    with pytest.raises(DSLError) as info:
        parse_spec(source)
    assert fragment in str(info.value)
    offset = source.index(anchor)
    line = source.count("\n", 0, offset) + 1
    column = offset - (source.rfind("\n", 0, offset) + 1) + 1
    assert (info.value.line, info.value.column) == (line, column)


def test_error_lists_expected_tokens():
    with pytest.raises(DSLError) as info:
        parse_spec('sandbox "s" version "1.0" { system_type a risk_class high requirement R { metric m } }')
    assert {'"<="', '">="'} <= info.value.expected


def test_invalid_utf8_reports_position():
    with pytest.raises(DSLError) as info:
        parse_spec(b'sandbox "s\n  \xff"')
    assert (info.value.line, info.value.column) == (2, 3)


# extensions ----------------------------------------------------------------------

def test_extension_add():
    e = parse_extension(ext("add requirement SECTOR.EMP.1 { metric m.b <= 0.2 }"))
    assert (e.name, e.extends_name, e.extends_version) == ("emp", "s", "1.0")
    assert len(e.additions) == 1 and len(e.refinements) == 0
    assert e.additions[0].id == "SECTOR.EMP.1"


def test_extension_refine():
    e = parse_extension(ext("refine requirement R.1 { metric m.a <= 0.3 }"))
    assert len(e.refinements) == 1 and not e.additions
    assert e.refinements[0].bindings[0].threshold == 0.3


def test_add_refine_conflict():
    with pytest.raises(DSLError, match="conflict"):
        parse_extension(ext("add requirement X { metric m <= 1 } refine requirement X { metric m <= 0.5 }"))


def test_refine_cannot_be_unbound():
    with pytest.raises(DSLError):
        parse_extension(ext("refine requirement R.1 unbound"))


def test_multiple_extension_blocks():
    text = ext("add requirement A { metric m <= 1 }") + "\n" + ext("add requirement B unbound")
    exts = parse_extensions(text)
    assert [e.additions[0].id for e in exts] == ["A", "B"]
    assert parse_extensions(format_extensions(exts)) == exts
    with pytest.raises(DSLError):
        parse_extension(text)
    assert parse_any(text) == exts
    assert parse_any(MINIMAL_SPEC) == parse_spec(MINIMAL_SPEC)
    with pytest.raises(DSLError):
        parse_any("requirement R unbound")


# merge ----------------------------------------------------------------------

def test_merge_identity():
    core = parse_spec(CORE)
    eff = merge(core, [])
    assert eff.requirements == core.requirements
    assert eff.applied_extensions == ()
    assert eff.origins == {"R.1": "core"}


def test_refine_tightens():
    eff = merge(parse_spec(CORE), [parse_extension(ext("refine requirement R.1 { metric m.a <= 0.3 }"))])
    assert eff.requirement("R.1").binding("m.a").threshold == min(0.5, 0.3)
    assert eff.applied_extensions == ("emp",)


def test_refine_loosening_rejected():
    with pytest.raises(MergeError, match="loosens"):
        merge(parse_spec(CORE), [parse_extension(ext("refine requirement R.1 { metric m.a <= 0.7 }"))])


def test_ge_direction():
    core = parse_spec(CORE.replace("m.a <= 0.5", "m.a >= 0.5"))
    eff = merge(core, [parse_extension(ext("refine requirement R.1 { metric m.a >= 0.9 }"))])
    assert eff.requirement("R.1").binding("m.a").threshold_text == "0.9"
    with pytest.raises(MergeError):
        merge(core, [parse_extension(ext("refine requirement R.1 { metric m.a >= 0.1 }"))])


def test_comparator_change_rejected():
    with pytest.raises(MergeError, match="comparator"):
        merge(parse_spec(CORE), [parse_extension(ext("refine requirement R.1 { metric m.a >= 0.9 }"))])


def test_refine_adds_new_binding_and_keeps_label():
    e = parse_extension(ext('refine requirement R.1 "ignored" { metric m.z >= 2 }'))
    req = merge(parse_spec(CORE), [e]).requirement("R.1")
    assert [b.metric_id for b in req.bindings] == ["m.a", "m.z"]
    assert req.label is None


def test_extension_errors():
    core = parse_spec(CORE)
    cases = [
        'extension "e" extends "other" version "1.0" { add requirement X unbound }',
        ext("refine requirement NOPE { metric m <= 1 }"),
        ext("add requirement R.1 unbound"),
    ]
    for text in cases:
        with pytest.raises(MergeError):
            merge(core, [parse_extension(text)])


def test_two_extensions_adding_same_id():
    core = parse_spec(CORE)
    a = parse_extension(ext("add requirement X unbound"))
    b = SpecExtension("other", "s", "1.0", a.additions, ())
    with pytest.raises(MergeError, match="emp"):
        merge(core, [a, b])


def test_refinement_order_independent():
    core = parse_spec(CORE)
    a = parse_extension(ext("refine requirement R.1 { metric m.a <= 0.3 }"))
    b = SpecExtension("b", "s", "1.0", (), (Requirement("R.1", None, (MetricBinding("m.a", "LE", "0.40"),)),))
    assert merge(core, [a, b]).requirements == merge(core, [b, a]).requirements


def test_tightest_tie_breaks_on_text():
    x, y = MetricBinding("m", "LE", "0.50"), MetricBinding("m", "LE", "0.5")
    assert tightest(x, y) == tightest(y, x) == y


def test_hiring_merge_fixture():
    core = parse_spec((HIRING / "screener.aits").read_bytes())
    exts = parse_extensions((HIRING / "employment.aitsx").read_bytes())
    eff = merge(core, exts)
    assert eff.requirement("AIA.Art10").binding("fair.dpd").threshold_text == "0.08"
    assert eff.origins["SECTOR.EMP.1"] == "employment"
    assert [r.id for r in eff.requirements] == ["AIA.Art10", "AIA.Art15", "SECTOR.EMP.1"]


def test_sequential_composition_random():
    rng = random.Random(7)
    for _ in range(200):
        core, exts = gen.merge_case(rng, 3)
        eff = merge(core, exts[:1])
        for e in exts[1:]:
            eff = extend(eff, e)
        assert eff == merge(core, exts)


# formatting and hashing ---------------------------------------------------------

def test_format_round_trip():
    spec = parse_spec(MINIMAL_SPEC)
    assert parse_spec(format_spec(spec)) == spec
    assert format_spec(spec) == (
        'sandbox "s" version "1.0" {\n'
        "  system_type classifier\n"
        "  risk_class high\n"
        "  requirement R.1 {\n"
        "    metric m.a <= 0.5\n"
        "  }\n"
        "}\n")


def test_threshold_text_is_preserved():
    spec = parse_spec(CORE.replace("0.5", "5.0E-1"))
    assert "5.0E-1" in format_spec(spec)
    assert spec_hash(spec) != spec_hash(parse_spec(CORE))


def test_effective_spec_format_parses():
    core = parse_spec((HIRING / "screener.aits").read_bytes())
    eff = merge(core, parse_extensions((HIRING / "employment.aitsx").read_bytes()))
    text = format_spec(eff)
    assert text.startswith("# applied extensions: employment\n")
    assert parse_spec(text) == eff.flatten()
    assert format_spec(merge(core, [])).startswith("# applied extensions: -\n")
    assert spec_hash(eff) != spec_hash(merge(core, []))


def test_minimal_hash_matches_reference_sha256():
    spec = parse_spec(MINIMAL_SPEC)
    assert spec_hash(spec) == MINIMAL_HASH
    assert sha256_hex(format_spec(spec).encode("utf-8")) == MINIMAL_HASH
    assert spec_hash(spec) == spec_hash(parse_spec(MINIMAL_SPEC))
    assert spec_hash(parse_spec("# c\n" + MINIMAL_SPEC + "\n# tail")) == MINIMAL_HASH


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_round_trip_property(seed):
    spec = gen.spec(random.Random(seed))
    assert parse_spec(format_spec(spec)) == spec


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_parser_never_crashes(data):
    try:
        parse_spec(data)
    except DSLError:
        pass
