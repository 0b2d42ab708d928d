import pytest
from hypothesis import given, settings, strategies as st

from pathid import expdsl
from pathid.expdsl import ParseError, ValidationError, parse, unparse, validate

MINIMAL = """source P1 signal=1:H idler=2:V eps=0.1
detect 1=one 2=one
"""


@pytest.mark.parametrize("name", ["fig1b.exp", "fig1c.exp", "swapfree_phase.exp"])
def test_bundled_specs_parse_cleanly(bundled, name):
    spec = bundled(name)
    assert validate(spec) == []
    assert len(spec.build_state()) == 11
    assert parse(unparse(spec)) == spec


def test_comments_blank_lines_and_crlf():
    text = "# header\r\n\r\n" + MINIMAL.replace("\n", "   # trailing\r\n")
    spec = parse(text)
    assert len(spec.sources) == 1
    assert spec.max_order == 2
    assert spec.dephasing_gamma == 1.0


def test_unknown_keyword_reports_position():
    with pytest.raises(ParseError) as err:
        parse(MINIMAL + "  laser P9\n")
    assert err.value.line == 3
    assert err.value.column == 3


def test_bad_mode_reports_column():
    with pytest.raises(ParseError) as err:
        parse("source P1 signal=1:X idler=2:V eps=0.1\n")
    assert err.value.line == 1
    assert err.value.column == 18
    assert "line 1, col 18" in str(err.value)


@pytest.mark.parametrize("text", [
    "",
    "# nothing\n",
    "source P1 signal=1:H idler=2:V\n",
    "source P1 signal=1:H idler=2:V eps=abc\n",
    "source P1 signal=1:H idler=2:V eps=0.1 eps=0.2\n",
    "source P1 signal=1:H idler=2:V eps=0.1 colour=red\n",
    MINIMAL + "order 1.5\n",
    MINIMAL + "gamma 0.5\ngamma 0.6\n",
    MINIMAL + "detect 1=one 2=one\n",
    "source P1 signal=1:H idler=2:V eps=0.1\ndetect 1=one 1=one\n",
    "source P1 signal=1:H idler=2:V eps=0.1\ndetect 1=maybe 2=one\n",
    "source P1 signal=1:H idler=2:V eps=nan\n",
])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse(text)


@pytest.mark.parametrize("text", [
    "source P1 signal=1:H idler=2:V eps=0.5\n",
    "source P1 signal=1:H idler=1:H eps=0.1\n",
    MINIMAL + "source P1 signal=3:H idler=4:V eps=0.1\n",
    MINIMAL + "gamma 1.5\n",
    MINIMAL + "order -1\n",
    "source P1 signal=1:H idler=2:V eps=0.1\ndetect 1=one 7=one\n",
    "source P1 signal=1:H idler=2:V eps=0.1\ndetect 1=one 2=bucket:V\n",
])
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        parse(text)


def test_large_eps_warns():
    warnings = validate(parse(MINIMAL.replace("0.1", "0.4")))
    assert any("perturbative accuracy" in w for w in warnings)


def test_unfed_detected_mode_warns():
    text = """source P1 signal=1:H idler=2:V eps=0.1
rotator path=3
detect 1=one 2=one 3=one:V
"""
    warnings = validate(parse(text))
    assert any("no source feeds" in w for w in warnings)


def test_missing_detect_warns_and_blocks_postselection():
    spec = parse("source P1 signal=1:H idler=2:V eps=0.1\n")
    assert any("no detect" in w for w in validate(spec))
    with pytest.raises(ValidationError):
        spec.postselected()


def test_low_order_warns(bundled):
    spec = bundled("fig1b.exp").with_overrides(order=1)
    assert any("order 1" in w for w in validate(spec))


def test_overrides_and_phase():
    spec = parse(MINIMAL)
    assert spec.with_overrides(gamma=0.3).dephasing_gamma == 0.3
    with pytest.raises(ValidationError):
        spec.with_overrides(gamma=-0.1)
    with pytest.raises(ValidationError):
        spec.with_phase(0.5)


def test_load_from_file(tmp_path):
    path = tmp_path / "x.exp"
    path.write_text(MINIMAL)
    assert expdsl.load(path).name == "x.exp"


modes = st.builds(lambda p, q: f"{p}:{q}", st.integers(1, 6), st.sampled_from("HV"))
floats = st.floats(-3.0, 3.0, allow_nan=False)


@st.composite
def spec_texts(draw):
    lines = []
    n = draw(st.integers(1, 4))
    for k in range(n):
        sig = draw(modes)
        idl = draw(modes.filter(lambda m: m != sig))
        eps = draw(st.floats(0.0, 0.2))
        lines.append(f"source S{k} signal={sig} idler={idl} eps={eps!r} phase={draw(floats)!r}")
        if draw(st.booleans()):
            lines.append(f"rotator path={draw(st.integers(1, 6))}")
        if draw(st.booleans()):
            lines.append(f"phase mode={draw(modes)} value={draw(floats)!r}")
    lines.append(f"order {draw(st.integers(0, 3))}")
    lines.append(f"gamma {draw(st.floats(0.0, 1.0))!r}")
    return "\n".join(lines) + "\n"


@settings(max_examples=80, deadline=None)
@given(spec_texts())
def test_unparse_parse_round_trip(text):
    spec = parse(text)
    again = parse(unparse(spec))
    assert again == spec
    assert unparse(again) == unparse(spec)
