from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from subfreq.vtt import (
    CENSORED,
    SOUND,
    Cue,
    VttParseError,
    collapse_scrolling,
    mark_special_regions,
    parse_vtt,
    strip_markup,
)

FIX = Path(__file__).parent / "fixtures"


def test_minimal_file():
    doc = parse_vtt(b"WEBVTT\n\n00:00.000 --> 00:01.000\nhello\n")
    assert len(doc.cues) == 1
    assert doc.cues[0] == Cue(0, 1000, ("hello",))
    assert doc.text_lines == ["hello"]


def test_markup_stripped():
    doc = parse_vtt("WEBVTT\n\n00:00.000 --> 00:01.000\n<i>hi</i> <c.color>there</c>\n")
    assert doc.text_lines == ["hi there"]
    assert strip_markup("<v Roger>yes</v> <00:00:01.200><c>no</c>") == "yes no"
    assert strip_markup("<ruby>漢<rt>かん</rt></ruby>") == "漢"
    assert strip_markup("a &amp; b &lt;c&gt;") == "a & b <c>"


def test_bom_header_and_settings():
    data = "﻿WEBVTT\nKind: captions\n\nabc\n00:00:01.000 --> 00:00:02.000 align:start line:0%\nx\n"
    doc = parse_vtt(data.encode("utf-8"))
    assert doc.text_lines == ["x"]
    assert doc.cues[0].start_ms == 1000


def test_missing_signature():
    with pytest.raises(VttParseError):
        parse_vtt(b"00:00.000 --> 00:01.000\nhello\n")
    with pytest.raises(VttParseError):
        parse_vtt(b"WEBVTTX\n")
    with pytest.raises(VttParseError):
        parse_vtt(b"\xff\xfeW")


def test_fifty_cue_fixture():
    doc = parse_vtt((FIX / "vtt_fifty_cues.vtt").read_bytes())
    assert len(doc.cues) == 47
    assert len(doc.warnings) == 3
    assert "line number 11" not in doc.text_lines
    assert doc.text_lines[0] == "line number 1"


def test_rolling_fixture_golden():
    doc = parse_vtt((FIX / "vtt_rolling.vtt").read_bytes())
    golden = (FIX / "vtt_rolling.golden.txt").read_text(encoding="utf-8").splitlines()
    assert len(doc.cues) == 20
    assert doc.text_lines == golden


def test_cues_sorted():
    data = "WEBVTT\n\n00:05.000 --> 00:06.000\nb\n\n00:01.000 --> 00:03.000\na\n\n00:01.000 --> 00:02.000\nz\n"
    doc = parse_vtt(data)
    assert [(c.start_ms, c.end_ms) for c in doc.cues] == [(1000, 2000), (1000, 3000), (5000, 6000)]


def test_cue_invariant():
    with pytest.raises(ValueError):
        Cue(2000, 1000, ("x",))


def test_collapse_examples():
    assert collapse_scrolling([["A"], ["A", "B"], ["B", "C"]]) == ["A", "B", "C"]
    assert collapse_scrolling([["A"], ["B"], ["A"]]) == ["A", "B", "A"]
    # a wider window sees overlap spanning the last two cues
    cues = [["A", "B"], ["C"], ["B", "C", "D"]]
    assert collapse_scrolling(cues, window=2) == ["A", "B", "C", "D"]
    assert collapse_scrolling(cues) == ["A", "B", "C", "B", "C", "D"]


def test_special_regions():
    assert mark_special_regions("[ __ ] you") == f"{CENSORED} you"
    assert mark_special_regions("[ _ _ ] you") == f"{CENSORED} you"
    assert mark_special_regions("[ominous music] hello") == f"{SOUND} hello"
    assert mark_special_regions("【拍手】ありがとう") == f"{SOUND}ありがとう"
    assert mark_special_regions("a [b") == "a [b"
    assert mark_special_regions("[] x") == "[] x"
    assert mark_special_regions("[a [b] c]") == SOUND


lines_st = st.lists(st.sampled_from(["A", "B", "C", "D"]), min_size=0, max_size=3)


@settings(max_examples=200, deadline=None)
@given(st.lists(lines_st, max_size=12), st.integers(1, 3))
def test_collapse_properties(cues, window):
    out = collapse_scrolling(cues, window)
    flat = [ln for c in cues for ln in c]
    assert set(out) <= set(flat)
    # output is a subsequence of the flattened input
    it = iter(flat)
    assert all(any(x == y for y in it) for x in out)


text_st = st.text(alphabet=st.sampled_from(list("ab _[]【】 x")), max_size=30)


@settings(max_examples=300, deadline=None)
@given(text_st)
def test_marking_idempotent(line):
    once = mark_special_regions(line)
    assert mark_special_regions(once) == once


@settings(max_examples=100, deadline=None)
@given(st.lists(st.text(alphabet=st.sampled_from(list("abc <i>&;")), min_size=0, max_size=12), max_size=8))
def test_parse_deterministic_lines_nonempty(payloads):
    body = "".join(f"00:00:{i:02d}.000 --> 00:00:{i:02d}.500\n{p}\n\n" for i, p in enumerate(payloads))
    data = ("WEBVTT\n\n" + body).encode()
    a, b = parse_vtt(data), parse_vtt(data)
    assert a.text_lines == b.text_lines and a.cues == b.cues
    assert all(ln.strip() for ln in a.text_lines)
    assert all("<i>" not in ln and "-->" not in ln for ln in a.text_lines)
