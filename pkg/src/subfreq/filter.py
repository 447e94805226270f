"""Per-line language identification and file-level cleaning."""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .vtt import SubtitleDocument

log = logging.getLogger(__name__)

UNKNOWN = "unknown"

BELOW_THRESHOLD = "below-threshold"
TOO_SHORT = "too-short"

SCRIPTS: dict[str, tuple[tuple[int, int], ...]] = {
    "latin": ((0x41, 0x5A), (0x61, 0x7A), (0xC0, 0xD6), (0xD8, 0xF6), (0xF8, 0x24F),
              (0x1E00, 0x1EFF)),
    "han": ((0x3005, 0x3007), (0x3400, 0x4DBF), (0x4E00, 0x9FFF), (0xF900, 0xFAFF),
            (0x20000, 0x2FA1F)),
    "hiragana": ((0x3040, 0x309F),),
    "katakana": ((0x30A0, 0x30FF), (0x31F0, 0x31FF), (0xFF66, 0xFF9F)),
    "hangul": ((0x1100, 0x11FF), (0x3130, 0x318F), (0xAC00, 0xD7AF)),
    "cyrillic": ((0x400, 0x4FF),),
    "greek": ((0x370, 0x3FF),),
    "arabic": ((0x600, 0x6FF), (0x750, 0x77F)),
    "hebrew": ((0x590, 0x5FF),),
    "devanagari": ((0x900, 0x97F),),
    "thai": ((0xE00, 0xE7F),),
}

DEFAULT_SCRIPTS = {
    "zh": ("han",),
    "ja": ("han", "hiragana", "katakana"),
    "ko": ("hangul",),
    "ru": ("cyrillic",),
}

_SENTINEL_RE = re.compile(r"⟦[A-Z]+⟧")


class ProfileError(ValueError):
    pass


def _parse_range(spec: str) -> tuple[int, int]:
    m = re.fullmatch(r"U\+([0-9A-Fa-f]+)(?:-U\+([0-9A-Fa-f]+))?", spec.strip())
    if m is None:
        raise ProfileError(f"unknown script or range {spec!r}")
    lo = int(m.group(1), 16)
    hi = int(m.group(2), 16) if m.group(2) else lo
    if hi < lo:
        raise ProfileError(f"empty range {spec!r}")
    return lo, hi


def resolve_scripts(names: Iterable[str]) -> tuple[tuple[int, int], ...]:
    """Map script names (``latin``, ``han``...) or ``U+XXXX-U+YYYY`` to ranges."""
    ranges: list[tuple[int, int]] = []
    for name in names:
        if name.lower() in SCRIPTS:
            ranges.extend(SCRIPTS[name.lower()])
        else:
            ranges.append(_parse_range(name))
    return tuple(sorted(set(ranges)))


@dataclass(frozen=True)
class LanguageProfile:
    language: str
    valid_script_ranges: tuple[tuple[int, int], ...]
    min_target_fraction: float = 0.95
    min_lines: int = 3

    def __post_init__(self):
        if not self.valid_script_ranges:
            raise ProfileError("valid_script_ranges must be non-empty")
        if not 0.0 <= self.min_target_fraction <= 1.0:
            raise ProfileError("min_target_fraction must be in [0, 1]")
        if self.min_lines < 1:
            raise ProfileError("min_lines must be >= 1")

    @classmethod
    def default(cls, language: str, **kw) -> "LanguageProfile":
        """Built-in profile: Latin script unless the language has its own default."""
        scripts = DEFAULT_SCRIPTS.get(language, ("latin",))
        return cls(language, resolve_scripts(scripts), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "LanguageProfile":
        language = d["language"]
        scripts = d.get("scripts") or DEFAULT_SCRIPTS.get(language, ("latin",))
        return cls(
            language,
            resolve_scripts(scripts),
            float(d.get("min_target_fraction", 0.95)),
            int(d.get("min_lines", 3)),
        )

    def is_valid_char(self, ch: str) -> bool:
        cp = ord(ch)
        return any(lo <= cp <= hi for lo, hi in self.valid_script_ranges)

    def has_valid_chars(self, line: str) -> bool:
        return any(self.is_valid_char(ch) for ch in line)


def load_profile(path: str | Path) -> LanguageProfile:
    """Load a language profile from a TOML or JSON file."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
    else:
        from ._toml import load_toml

        data = load_toml(path)
    return LanguageProfile.from_dict(data.get("profile", data))


# -- identifiers -------------------------------------------------------------


class LanguageIdentifier(Protocol):
    def predict(self, line: str) -> tuple[str, float]:
        """Top language label and its confidence in [0, 1]."""


def identify_line(line: str, identifier: LanguageIdentifier) -> tuple[str, float]:
    """Label ``line`` with ``identifier``; failures become ``("unknown", 0.0)``."""
    if not line.strip():
        raise ValueError("identify_line needs a non-empty line")
    try:
        label, conf = identifier.predict(line)
    except Exception as e:  # identifier is third-party code
        log.warning("language identifier failed on %r: %s", line, e)
        return UNKNOWN, 0.0
    return str(label), min(1.0, max(0.0, float(conf)))


def _script_of(ch: str) -> str | None:
    cp = ord(ch)
    for name, ranges in SCRIPTS.items():
        for lo, hi in ranges:
            if lo <= cp <= hi:
                return name
    return None


_SCRIPT_LANG = {
    "hangul": "ko",
    "cyrillic": "ru",
    "greek": "el",
    "arabic": "ar",
    "hebrew": "he",
    "devanagari": "hi",
    "thai": "th",
}


def _features(text: str) -> list[str]:
    feats: list[str] = []
    for word in re.findall(r"[^\W\d_]+(?:'[^\W\d_]+)?", text.lower()):
        feats.append("w:" + word)
        padded = f" {word} "
        for n in (1, 2, 3):
            feats.extend(padded[i : i + n] for i in range(len(padded) - n + 1))
    return feats


class NgramLanguageIdentifier:
    """Script detection plus a character n-gram naive Bayes model for Latin text.

    Lines with kana are Japanese, Han-only lines Chinese, other non-Latin
    scripts map to one language each. Latin-script lines are scored against
    the bundled seed texts (or ``training`` when given).
    """

    def __init__(self, training: dict[str, Sequence[str]] | None = None, alpha: float = 0.1):
        if training is None:
            training = self._bundled()
        self.alpha = alpha
        self.languages = sorted(training)
        self.counts: dict[str, Counter] = {}
        self.totals: dict[str, int] = {}
        vocab: set[str] = set()
        for lang in self.languages:
            c = Counter(f for line in training[lang] for f in _features(line))
            self.counts[lang] = c
            self.totals[lang] = sum(c.values())
            vocab.update(c)
        self.vocab_size = len(vocab) + 1

    @staticmethod
    def _bundled() -> dict[str, list[str]]:
        out = {}
        root = resources.files("subfreq") / "data" / "langid"
        for entry in root.iterdir():
            if entry.name.endswith(".txt"):
                text = entry.read_text(encoding="utf-8")
                out[entry.name[:-4]] = [ln for ln in text.splitlines() if ln.strip()]
        return out

    def _latin_scores(self, text: str) -> dict[str, float]:
        feats = _features(text)
        scores = {}
        for lang in self.languages:
            c, denom = self.counts[lang], math.log(self.totals[lang] + self.alpha * self.vocab_size)
            scores[lang] = sum(math.log(c[f] + self.alpha) - denom for f in feats)
        return scores

    def predict(self, line: str) -> tuple[str, float]:
        by_script = Counter(s for s in map(_script_of, line) if s is not None)
        letters = sum(by_script.values())
        if not letters:
            return UNKNOWN, 0.0
        kana = by_script["hiragana"] + by_script["katakana"]
        cjk = kana + by_script["han"]
        top, top_n = by_script.most_common(1)[0]
        if cjk and cjk >= by_script["latin"] and cjk == max(cjk, top_n):
            return ("ja" if kana else "zh"), cjk / letters
        if top != "latin":
            return _SCRIPT_LANG.get(top, UNKNOWN), top_n / letters
        scores = self._latin_scores(line)
        best = max(scores, key=scores.get)
        z = sum(math.exp(s - scores[best]) for s in scores.values())
        return best, (by_script["latin"] / letters) / z


class StubIdentifier:
    """Answers every line with one fixed label (testing and forced runs)."""

    def __init__(self, label: str, confidence: float = 1.0):
        self.label = label
        self.confidence = confidence

    def predict(self, line: str) -> tuple[str, float]:
        return self.label, self.confidence


class FastTextIdentifier:
    """Adapter for a fastText ``lid.176`` style model (needs ``fasttext``)."""

    def __init__(self, model_path: str | Path):
        import fasttext  # optional dependency

        self.model = fasttext.load_model(str(model_path))

    def predict(self, line: str) -> tuple[str, float]:
        labels, probs = self.model.predict(line.replace("\n", " "))
        return labels[0].removeprefix("__label__"), float(probs[0])


def make_identifier(name: str) -> LanguageIdentifier:
    """``builtin``, ``fasttext:<model path>`` or ``stub:<label>``."""
    kind, _, arg = name.partition(":")
    if kind == "builtin":
        return NgramLanguageIdentifier()
    if kind == "fasttext":
        return FastTextIdentifier(arg)
    if kind == "stub":
        return StubIdentifier(arg)
    raise ValueError(f"unknown identifier {name!r}")


# -- cleaning ----------------------------------------------------------------


@dataclass(frozen=True)
class LineVerdict:
    line: str
    identified_language: str
    has_valid_chars: bool
    keep: bool
    special_only: bool = False


@dataclass
class CleanResult:
    document: SubtitleDocument | None
    verdicts: list[LineVerdict]
    target_fraction: float
    reason: str | None = None
    detail: str = ""

    @property
    def accepted(self) -> bool:
        return self.reason is None


def judge_line(
    line: str, profile: LanguageProfile, identifier: LanguageIdentifier
) -> LineVerdict:
    text = _SENTINEL_RE.sub(" ", line).strip()
    if not text:
        # nothing but special tokens: kept, not language-identified
        return LineVerdict(line, UNKNOWN, False, True, special_only=True)
    valid = profile.has_valid_chars(text)
    if valid and len(text.replace(" ", "")) < 3:
        return LineVerdict(line, profile.language, valid, True)
    lang, _ = identify_line(text, identifier)
    return LineVerdict(line, lang, valid, valid and lang == profile.language)


def clean_document(
    doc: SubtitleDocument, profile: LanguageProfile, identifier: LanguageIdentifier
) -> CleanResult:
    """Apply the file threshold, line filters and minimum length to ``doc``.

    The target-language fraction is taken over lines that carry text, before
    any line is removed. Lines holding only special tokens are kept but do
    not count toward the fraction or the minimum line count.
    """
    verdicts = [judge_line(ln, profile, identifier) for ln in doc.text_lines]
    scored = [v for v in verdicts if not v.special_only]
    n_target = sum(v.identified_language == profile.language for v in scored)
    fraction = n_target / len(scored) if scored else 0.0
    if fraction < profile.min_target_fraction:
        return CleanResult(
            None, verdicts, fraction, BELOW_THRESHOLD,
            f"{n_target}/{len(scored)} lines in {profile.language}",
        )
    kept = [v.line for v in verdicts if v.keep]
    n_text = sum(1 for v in verdicts if v.keep and not v.special_only)
    if n_text < profile.min_lines:
        return CleanResult(
            None, verdicts, fraction, TOO_SHORT,
            f"{n_text} lines left, need {profile.min_lines}",
        )
    return CleanResult(replace(doc, text_lines=kept), verdicts, fraction)
