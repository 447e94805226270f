"""WebVTT parsing, scroll-repetition collapse and special-region marking."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import VideoRecord

log = logging.getLogger(__name__)

CENSORED = "⟦CENSORED⟧"
SOUND = "⟦SOUND⟧"


class VttParseError(ValueError):
    """The input is not a WebVTT file."""


@dataclass(frozen=True)
class Cue:
    start_ms: int
    end_ms: int
    lines: tuple[str, ...]

    def __post_init__(self):
        if self.start_ms < 0 or self.end_ms < self.start_ms:
            raise ValueError(f"invalid cue timing {self.start_ms} --> {self.end_ms}")


@dataclass
class SubtitleDocument:
    video: VideoRecord | None
    cues: list[Cue]
    text_lines: list[str]
    warnings: list[str] = field(default_factory=list)


_TS = r"(?:(\d{2,}):)?([0-5]\d):([0-5]\d)\.(\d{3})"
_TIMING = re.compile(rf"^\s*{_TS}[ \t]+-->[ \t]+{_TS}(?:[ \t]+.*)?$")

_TAGS = re.compile(
    r"<(?:/?(?:c|i|b|u|v|lang|ruby|rt|rp|rb)(?:\.[^\s<>]*)?(?:[ \t][^<>]*)?"
    r"|(?:\d{2,}:)?\d{2}:\d{2}\.\d{3})>"
)
_RT = re.compile(r"<rt(?:\.[^\s<>]*)?>.*?</rt>|<rp>.*?</rp>", re.S)
_ENTITIES = {
    "&lt;": "<",
    "&gt;": ">",
    "&amp;": "&",
    "&nbsp;": " ",
    "&lrm;": "\u200e",
    "&rlm;": "\u200f",
}
_ENTITY = re.compile("|".join(map(re.escape, _ENTITIES)))
_SPACE = re.compile(r"\s+")


def _ms(h: str | None, m: str, s: str, frac: str) -> int:
    return ((int(h) if h else 0) * 3600 + int(m) * 60 + int(s)) * 1000 + int(frac)


def parse_timing(line: str) -> tuple[int, int] | None:
    """Parse a ``start --> end [settings]`` line into milliseconds.

    >>> parse_timing("00:01.000 --> 00:02.500 align:start")
    (1000, 2500)
    >>> parse_timing("00:61.000 --> 00:62.000") is None
    True
    """
    m = _TIMING.match(line)
    if m is None:
        return None
    g = m.groups()
    start, end = _ms(*g[:4]), _ms(*g[4:])
    if end < start:
        return None
    return start, end


def strip_markup(text: str) -> str:
    """Remove cue markup (classes, voices, ruby annotations, inline timestamps)."""
    text = _RT.sub("", text)
    text = _TAGS.sub("", text)
    return _ENTITY.sub(lambda m: _ENTITIES[m.group(0)], text)


def _clean_line(line: str) -> str:
    return _SPACE.sub(" ", strip_markup(line)).strip()


def _blocks(text: str) -> Iterable[list[str]]:
    # only empty lines end a block; whitespace-only lines are cue text
    block: list[str] = []
    for line in text.split("\n"):
        if line:
            block.append(line)
        elif block:
            yield block
            block = []
    if block:
        yield block


def parse_vtt(data: bytes | str, video: VideoRecord | None = None) -> SubtitleDocument:
    """Parse WebVTT content into a :class:`SubtitleDocument`.

    Malformed cue timings are skipped and recorded in ``warnings``; a
    missing ``WEBVTT`` signature raises :class:`VttParseError`.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise VttParseError(f"not UTF-8: {e}") from None
    else:
        text = data.removeprefix("\ufeff")
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if not re.match(r"WEBVTT(?:$|[ \t\n])", text):
        raise VttParseError("missing WEBVTT signature")

    cues: list[Cue] = []
    warnings: list[str] = []
    for i, block in enumerate(_blocks(text)):
        if i == 0:
            continue  # signature and header metadata
        head = block[0].strip()
        if head.startswith(("NOTE", "STYLE", "REGION")) and "-->" not in head:
            continue
        # optional cue identifier precedes the timing line
        if "-->" not in head and len(block) > 1:
            block = block[1:]
        if "-->" not in block[0]:
            warnings.append(f"block without cue timing: {head!r}")
            continue
        timing = parse_timing(block[0])
        if timing is None:
            warnings.append(f"malformed cue timing: {block[0].strip()!r}")
            continue
        lines = tuple(ln for ln in map(_clean_line, block[1:]) if ln)
        cues.append(Cue(timing[0], timing[1], lines))

    for w in warnings:
        log.warning("%s%s", f"{video.video_id}: " if video else "", w)
    cues.sort(key=lambda c: (c.start_ms, c.end_ms))
    return SubtitleDocument(video, cues, collapse_scrolling(cues), warnings)


def _overlap(prev: Sequence[str], cur: Sequence[str]) -> int:
    for k in range(min(len(prev), len(cur)), 0, -1):
        if tuple(prev[-k:]) == tuple(cur[:k]):
            return k
    return 0


def collapse_scrolling(cues: Sequence[Cue | Sequence[str]], window: int = 1) -> list[str]:
    """Flatten cues into lines, dropping lines repeated by rolling captions.

    A cue whose leading lines equal the trailing lines of the previous
    ``window`` cues contributes only its remaining lines. Repeats that are
    not carried over from the preceding cue(s) are kept.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    out: list[str] = []
    history: list[tuple[str, ...]] = []
    for cue in cues:
        lines = tuple(cue.lines if isinstance(cue, Cue) else cue)
        lines = tuple(ln for ln in lines if ln.strip())
        if not lines:
            continue
        context = [ln for prev in history[-window:] for ln in prev]
        out.extend(lines[_overlap(context, lines):])
        history.append(lines)
    return out


_CENSORED_RE = re.compile(r"\[\s*_\s*_\s*\]")
_BRACKET_RE = re.compile(r"\[[^\[\]]*[^\[\]\s][^\[\]]*\]|【[^【】]*[^【】\s][^【】]*】")


def mark_special_regions(line: str) -> str:
    """Replace censored-word markers and bracketed audio descriptions.

    >>> mark_special_regions("[ __ ] you")
    '⟦CENSORED⟧ you'
    >>> mark_special_regions("[ominous music] hello")
    '⟦SOUND⟧ hello'
    >>> mark_special_regions("a [b")
    'a [b'
    """
    line = _CENSORED_RE.sub(CENSORED, line)
    while True:
        new = _BRACKET_RE.sub(SOUND, line)
        if new == line:
            return line
        line = new
