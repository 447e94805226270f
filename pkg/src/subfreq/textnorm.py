"""Tokenization, NFKC/lowercase normalization and PII masking.

The ``regex`` variant is built in. The ``default``, ``base`` and ``lemma``
variants are produced by an external tokenizer process speaking a
line-oriented protocol over stdin/stdout:

* on startup the plugin prints ``TOKENIZER <variant> [<variant> ...]``;
* each request is one UTF-8 line, each response one line of
  space-separated tokens, in request order.

Special tokens (``⟦...⟧``) never reach the plugin; the host splits lines
around them and splices them back into the response.
"""

from __future__ import annotations

import logging
import os
import queue
import re
import shlex
import subprocess
import threading
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import VideoRecord
from .vtt import CENSORED, SOUND

log = logging.getLogger(__name__)

EMAIL = "⟦EMAIL⟧"
URL = "⟦URL⟧"
HANDLE = "⟦HANDLE⟧"
NUM = "⟦NUM⟧"
SPECIAL_TOKENS = frozenset({CENSORED, SOUND, EMAIL, URL, HANDLE, NUM})

VARIANTS = ("default", "base", "lemma", "regex")

_SENTINEL = r"⟦[A-Z]+⟧"
_SENTINEL_RE = re.compile(_SENTINEL)
_SENTINEL_FULL = re.compile(rf"{_SENTINEL}\Z")
_WORD_RE = re.compile(rf"{_SENTINEL}|[^\W\d]+")
_WORD_OR_DIGITS_RE = re.compile(rf"{_SENTINEL}|[^\W\d]+|\d+")

_EMAIL_PAT = r"[\w.%+-]+@[\w-]+(?:\.[\w-]+)*\.[^\W\d_]{2,}"
_HOST = r"(?:[^\W_](?:[\w-]*[^\W_])?\.)+[^\W\d_]{2,}"
_URL_PAT = (
    r"(?:(?:https?|ftp)://|www\.)[^\s<>\"]+"  # explicit protocol or www.
    rf"|{_HOST}[/?][^\s<>\"]*"  # host.tld/path without protocol
)
_HANDLE_PAT = r"@\w+(?:\.\w+)*"

_EMAIL_IN_LINE = re.compile(rf"(?<![\w.%+-]){_EMAIL_PAT}", re.I)
_URL_IN_LINE = re.compile(rf"(?<![\w@./-])(?:{_URL_PAT})", re.I)
_HANDLE_IN_LINE = re.compile(rf"(?<![\w@]){_HANDLE_PAT}")
_TRAILING_PUNCT = ".,;:!?)]}'\"…、。"

_EMAIL_TOKEN = re.compile(rf"{_EMAIL_PAT}\Z", re.I)
_URL_TOKEN = re.compile(rf"(?:{_URL_PAT})\Z", re.I)
_HANDLE_TOKEN = re.compile(rf"{_HANDLE_PAT}\Z")
_DIGITS_TOKEN = re.compile(r"\d+\Z")


def is_special(token: str) -> bool:
    return _SENTINEL_FULL.match(token) is not None


def normalize(token: str) -> str:
    """NFKC, then lowercase. Special tokens are returned unchanged.

    >>> normalize("ＡＢＣ")
    'abc'
    """
    if is_special(token):
        return token
    out = unicodedata.normalize("NFKC", token).lower()
    # lowercasing can leave a string that NFKC would change again
    while not unicodedata.is_normalized("NFKC", out):
        out = unicodedata.normalize("NFKC", out).lower()
    return out


def _sub_keep_trailing(pattern: re.Pattern, sentinel: str, line: str) -> str:
    def repl(m: re.Match) -> str:
        s = m.group(0)
        core = s.rstrip(_TRAILING_PUNCT)
        return f" {sentinel} {s[len(core):]}" if core else s

    return pattern.sub(repl, line)


def mask_line(line: str) -> str:
    """Mask emails, web addresses and ``@handles`` inside running text.

    Runs before tokenization so that ``@`` and ``.`` structure survives.
    """
    line = _EMAIL_IN_LINE.sub(f" {EMAIL} ", line)
    line = _sub_keep_trailing(_URL_IN_LINE, URL, line)
    line = _HANDLE_IN_LINE.sub(f" {HANDLE} ", line)
    return line


def mask_token(token: str) -> str:
    if is_special(token):
        return token
    if _EMAIL_TOKEN.match(token):
        return EMAIL
    if _URL_TOKEN.match(token):
        return URL
    if _HANDLE_TOKEN.match(token):
        return HANDLE
    if _DIGITS_TOKEN.match(token):
        return NUM
    return token


def mask_pii(tokens: Iterable[str]) -> list[str]:
    """Replace email, URL, handle and all-digit tokens, one for one."""
    return [mask_token(t) for t in tokens]


def tokenize_regex(line: str, keep_digits: bool = False) -> list[str]:
    """Maximal runs of word characters that are not digits.

    With ``keep_digits`` digit runs are returned as separate tokens, ready to
    be masked by :func:`mask_pii`. Special tokens are kept whole.
    """
    pat = _WORD_OR_DIGITS_RE if keep_digits else _WORD_RE
    # fold first so compatibility digits such as "¹" count as digits
    line = unicodedata.normalize("NFKC", line)
    return [normalize(t) for t in pat.findall(line)]


def regex_tokens(line: str) -> list[str]:
    """Full regex-variant path for one cleaned line: NFKC, mask, split, mask digits."""
    line = mask_line(unicodedata.normalize("NFKC", line))
    return mask_pii(tokenize_regex(line, keep_digits=True))


def split_normalized(tokens: Iterable[str]) -> list[str]:
    """Normalize tokens and re-split any that normalization made contain spaces."""
    out: list[str] = []
    for t in tokens:
        out.extend(normalize(t).split() if not is_special(t) else [t])
    return out


@dataclass
class TokenStream:
    video: VideoRecord | None
    tokens: list[str]
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown tokenization variant {self.variant!r}")
        for t in self.tokens:
            if not t or any(c.isspace() for c in t):
                raise ValueError(f"invalid token {t!r}")
            if not is_special(t) and normalize(t) != t:
                raise ValueError(f"token {t!r} is not normalized")


# -- plugin protocol ---------------------------------------------------------


class PluginError(RuntimeError):
    """Base class for tokenizer-plugin errors."""


class PluginFailure(PluginError):
    """Plugin crashed or timed out; the current document is lost."""


class PluginProtocolError(PluginError):
    """Plugin broke the protocol; this is not recoverable."""


@dataclass
class PluginSpec:
    """How to launch a tokenizer plugin.

    ``{variant}`` in any argument is replaced by the requested variant; the
    variant is also exported as ``SUBFREQ_VARIANT``.
    """

    command: Sequence[str]
    timeout: float = 30.0
    env: dict[str, str] = field(default_factory=dict)

    @classmethod
    def parse(cls, command: str | Sequence[str], **kw) -> "PluginSpec":
        if isinstance(command, str):
            command = shlex.split(command)
        return cls(list(command), **kw)


class PluginTokenizer:
    """A running tokenizer plugin serving one worker."""

    def __init__(self, spec: PluginSpec, variant: str):
        if variant not in ("default", "base", "lemma"):
            raise ValueError(f"plugins serve default/base/lemma, not {variant!r}")
        self.spec = spec
        self.variant = variant
        self.proc: subprocess.Popen | None = None
        self._out: queue.Queue[str | None] = queue.Queue()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, *exc):
        self.close(strict=exc_type is None)

    def start(self) -> None:
        argv = [a.replace("{variant}", self.variant) for a in self.spec.command]
        env = {**os.environ, **self.spec.env, "SUBFREQ_VARIANT": self.variant}
        self._out = queue.Queue()
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                encoding="utf-8",
                bufsize=1,
                env=env,
            )
        except OSError as e:
            raise PluginFailure(f"cannot start plugin {argv[0]!r}: {e}") from None
        self._reader = threading.Thread(target=self._pump, args=(self.proc, self._out), daemon=True)
        self._reader.start()
        hello = self._read(0, 0)
        parts = hello.split()
        if not parts or parts[0] != "TOKENIZER":
            self.close(strict=False)
            raise PluginProtocolError(f"bad handshake {hello!r}")
        if self.variant not in parts[1:]:
            self.close(strict=False)
            raise PluginProtocolError(
                f"plugin supports {parts[1:]}, not variant {self.variant!r}"
            )

    @staticmethod
    def _pump(proc: subprocess.Popen, out: "queue.Queue[str | None]") -> None:
        for line in proc.stdout:
            out.put(line.rstrip("\n"))
        out.put(None)

    def _read(self, got: int, expected: int) -> str:
        try:
            line = self._out.get(timeout=self.spec.timeout)
        except queue.Empty:
            line = self._after_timeout(got, expected)
        if line is None:
            rc = self.proc.wait()
            self.proc = None
            if rc == 0:
                raise PluginProtocolError(
                    f"plugin exited after {got} of {expected} responses"
                )
            raise PluginFailure(f"plugin exited with status {rc}")
        return line

    def _after_timeout(self, got: int, expected: int) -> None:
        """Tell a stalled plugin apart from one that skipped requests.

        Closing stdin lets a plugin that answered everything it intends to
        exit cleanly, which is a protocol error; anything else is a failure.
        """
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            line = self._out.get(timeout=min(1.0, self.spec.timeout))
        except queue.Empty:
            line = ""
        if line is None and self.proc.wait() == 0:
            self.proc = None
            raise PluginProtocolError(
                f"plugin answered {got} of {expected} requests and exited at end of input"
            )
        self.close(strict=False)
        raise PluginFailure(f"plugin timed out after {self.spec.timeout}s")

    def tokenize(self, lines: Sequence[str]) -> list[list[str]]:
        """Raw plugin tokens for each request line (no normalization)."""
        if self.proc is not None and not self._out.empty():
            left = self._out.get_nowait()
            if left is not None:
                self.close(strict=False)
                raise PluginProtocolError(f"unrequested response {left!r}")
            self.proc.wait()
            self.proc = None  # exited between documents; start afresh
        if self.proc is None:
            self.start()
        try:
            for line in lines:
                if "\n" in line:
                    raise ValueError("request lines must not contain newlines")
                self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            pass  # surfaced by the reads below
        return [self._read(i, len(lines)).split() for i in range(len(lines))]

    def tokenize_lines(self, lines: Iterable[str]) -> list[str]:
        """Tokens for cleaned lines, keeping special tokens and masking PII."""
        plan: list[str | int] = []
        requests: list[str] = []
        for line in lines:
            line = mask_line(unicodedata.normalize("NFKC", line))
            pos = 0
            for m in _SENTINEL_RE.finditer(line):
                seg = line[pos : m.start()].strip()
                if seg:
                    plan.append(len(requests))
                    requests.append(seg)
                plan.append(m.group(0))
                pos = m.end()
            seg = line[pos:].strip()
            if seg:
                plan.append(len(requests))
                requests.append(seg)
        responses = self.tokenize(requests) if requests else []
        tokens: list[str] = []
        for step in plan:
            if isinstance(step, str):
                tokens.append(step)
            else:
                tokens.extend(responses[step])
        return mask_pii(split_normalized(tokens))

    def close(self, strict: bool = True) -> None:
        """Stop the plugin. With ``strict``, unrequested output is an error."""
        proc, self.proc = self.proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        if not strict:
            return
        self._reader.join(timeout=2)
        extra = []
        while not self._out.empty():
            item = self._out.get_nowait()
            if item is not None:
                extra.append(item)
        if extra:
            raise PluginProtocolError(f"{len(extra)} unrequested response line(s)")


def run_plugin_tokenizer(
    lines: Iterable[str],
    plugin: PluginSpec,
    variant: str,
    video: VideoRecord | None = None,
) -> TokenStream:
    with PluginTokenizer(plugin, variant) as tok:
        return TokenStream(video, tok.tokenize_lines(lines), variant)


def tokenize_document(
    lines: Iterable[str],
    variant: str = "regex",
    video: VideoRecord | None = None,
    plugin: PluginTokenizer | None = None,
) -> TokenStream:
    """Tokenize one document's cleaned lines in ``variant``."""
    if variant == "regex":
        tokens = [t for line in lines for t in regex_tokens(line)]
        return TokenStream(video, tokens, variant)
    if plugin is None:
        raise ValueError(f"variant {variant!r} needs a tokenizer plugin")
    return TokenStream(video, plugin.tokenize_lines(lines), variant)
