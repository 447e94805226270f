"""Frequency tables and frequency lookup with smoothing and fallbacks."""

from __future__ import annotations

import logging
import math
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .textnorm import TokenStream, is_special, normalize, regex_tokens

log = logging.getLogger(__name__)

LAPLACE = "laplace"
MIN_FREQUENCY = "min-frequency"
MAX_VALUE = "max-value"
POLICIES = (LAPLACE, MIN_FREQUENCY, MAX_VALUE)
TRANSFORMS = ("log", "negate", "identity")


class TableError(ValueError):
    pass


@dataclass
class WordRow:
    count: int
    videos: int
    channels: int
    per_category: dict[str, int] = field(default_factory=dict)


@dataclass
class FrequencyTable:
    """Per-word counts plus corpus totals.

    Tables built from token streams remember each word's channel ids so they
    can be merged exactly; tables read from disk cannot be merged.
    """

    language: str
    variant: str
    rows: dict[str, WordRow] = field(default_factory=dict)
    n_tokens: int = 0
    n_documents: int = 0
    channel_ids: dict[str, set[str]] | None = field(default_factory=dict, repr=False)

    @property
    def n_types(self) -> int:
        return len(self.rows)

    @property
    def categories(self) -> list[str]:
        return sorted({c for r in self.rows.values() for c in r.per_category})

    def __contains__(self, word: str) -> bool:
        return word in self.rows

    def count(self, word: str) -> int:
        row = self.rows.get(word)
        return row.count if row else 0

    def sorted_words(self) -> list[str]:
        return sorted(self.rows, key=lambda w: (-self.rows[w].count, w))

    def add_stream(self, stream: TokenStream) -> None:
        if self.channel_ids is None:
            raise TableError("table loaded from disk cannot be extended")
        if stream.variant != self.variant:
            raise TableError(
                f"cannot mix variants {self.variant!r} and {stream.variant!r}"
            )
        video = stream.video
        category = video.category if video else "unknown"
        channel = video.channel_id if video else ""
        counts = Counter(stream.tokens)
        self.n_documents += 1
        for word, n in counts.items():
            row = self.rows.get(word)
            if row is None:
                row = self.rows[word] = WordRow(0, 0, 0)
                self.channel_ids[word] = set()
            row.count += n
            row.videos += 1
            row.per_category[category] = row.per_category.get(category, 0) + n
            self.channel_ids[word].add(channel)
            row.channels = len(self.channel_ids[word])
        self.n_tokens += sum(counts.values())

    def merge(self, other: "FrequencyTable") -> "FrequencyTable":
        """Field-wise sum of two tables over disjoint document sets."""
        if self.channel_ids is None or other.channel_ids is None:
            raise TableError("only tables built from streams can be merged")
        if (self.language, self.variant) != (other.language, other.variant):
            raise TableError("cannot merge tables of different language or variant")
        out = FrequencyTable(self.language, self.variant)
        for src in (self, other):
            for word, row in src.rows.items():
                dst = out.rows.get(word)
                if dst is None:
                    dst = out.rows[word] = WordRow(0, 0, 0)
                    out.channel_ids[word] = set()
                dst.count += row.count
                dst.videos += row.videos
                for c, n in row.per_category.items():
                    dst.per_category[c] = dst.per_category.get(c, 0) + n
                out.channel_ids[word] |= src.channel_ids[word]
                dst.channels = len(out.channel_ids[word])
            out.n_tokens += src.n_tokens
            out.n_documents += src.n_documents
        out.rows = {w: out.rows[w] for w in out.sorted_words()}
        return out

    # -- persistence ----------------------------------------------------------

    def to_tsv(self) -> str:
        cats = self.categories
        lines = [
            f"#tokens={self.n_tokens} #types={self.n_types}",
            f"#language={self.language} #variant={self.variant} #documents={self.n_documents}",
            "\t".join(["word", "count", "videos", "channels", "special"] + [f"count:{c}" for c in cats]),
        ]
        for w in self.sorted_words():
            r = self.rows[w]
            cols = [w, str(r.count), str(r.videos), str(r.channels), "1" if is_special(w) else "0"]
            cols += [str(r.per_category.get(c, 0)) for c in cats]
            lines.append("\t".join(cols))
        return "\n".join(lines) + "\n"

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_tsv())

    @classmethod
    def read(cls, path: str | os.PathLike) -> "FrequencyTable":
        header: dict[str, str] = {}
        table = None
        cats: list[str] = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if line.startswith("#"):
                    header.update(re.findall(r"#(\w+)=(\S*)", line))
                    continue
                cols = line.split("\t")
                if table is None:
                    if cols[:5] != ["word", "count", "videos", "channels", "special"]:
                        raise TableError(f"{path}:{lineno}: not a frequency table header")
                    cats = [c.removeprefix("count:") for c in cols[5:]]
                    table = cls(header.get("language", ""), header.get("variant", ""), channel_ids=None)
                    continue
                try:
                    count, videos, channels = (int(c) for c in cols[1:4])
                    per = {c: int(n) for c, n in zip(cats, cols[5:]) if int(n)}
                except (ValueError, IndexError):
                    raise TableError(f"{path}:{lineno}: malformed row") from None
                table.rows[cols[0]] = WordRow(count, videos, channels, per)
        if table is None:
            raise TableError(f"{path}: empty frequency table")
        try:
            table.n_tokens = int(header["tokens"])
            n_types = int(header["types"])
        except KeyError:
            raise TableError(f"{path}: missing #tokens/#types header") from None
        if n_types != table.n_types:
            raise TableError(f"{path}: header says {n_types} types, found {table.n_types}")
        table.n_documents = int(header.get("documents", 0))
        return table


def build_table(streams: Iterable[TokenStream], language: str = "", variant: str | None = None) -> FrequencyTable:
    """Aggregate token streams; row order is count descending, then word."""
    streams = list(streams)
    if variant is None:
        variant = streams[0].variant if streams else "regex"
    table = FrequencyTable(language, variant)
    for s in sorted(streams, key=lambda s: s.video.video_id if s.video else ""):
        table.add_stream(s)
    table.rows = {w: table.rows[w] for w in table.sorted_words()}
    return table


# -- providers ---------------------------------------------------------------


def default_item_tokenizer(item: str) -> list[str]:
    return regex_tokens(item)


class FrequencyProvider:
    """A frequency (or inverted metric) source used to score rating items.

    ``laplace``: Laplace-smoothed relative frequency from counts and totals.
    ``min-frequency``: the given value, with the list minimum for missing words.
    ``max-value``: the given value, with the list maximum for missing words;
    meant for metrics where high means rare, combined with ``negate``.
    """

    def __init__(
        self,
        values: Mapping[str, float],
        policy: str = LAPLACE,
        transform: str | None = None,
        n_tokens: int | None = None,
        n_types: int | None = None,
        name: str = "",
        tokenizer: Callable[[str], list[str]] | None = None,
        include_special: bool = False,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        if transform is None:
            transform = "negate" if policy == MAX_VALUE else "log"
        if transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {transform!r}")
        if (policy == MAX_VALUE) != (transform == "negate"):
            raise ValueError("the max-value policy goes with, and only with, the negate transform")
        if policy == LAPLACE:
            if n_tokens is None or n_types is None:
                raise ValueError("laplace policy needs #tokens and #types")
            if n_tokens + n_types <= 0:
                raise TableError("undefined frequency: #tokens + #types = 0")
        elif not values:
            raise ValueError(f"{policy} policy needs a non-empty list")
        if policy == MIN_FREQUENCY and transform == "log" and min(values.values()) <= 0:
            raise ValueError("log of non-positive frequency")
        self.values = dict(values)
        self.policy = policy
        self.transform = transform
        self.n_tokens = n_tokens
        self.n_types = n_types
        self.name = name
        self.tokenizer = tokenizer or default_item_tokenizer
        self.include_special = include_special
        self._fallback = (
            min(self.values.values()) if policy == MIN_FREQUENCY
            else max(self.values.values()) if policy == MAX_VALUE
            else None
        )

    @classmethod
    def from_table(cls, table: FrequencyTable, name: str = "", **kw) -> "FrequencyProvider":
        counts = {w: r.count for w, r in table.rows.items()}
        return cls(counts, LAPLACE, n_tokens=table.n_tokens, n_types=table.n_types,
                   name=name or table.variant, **kw)

    @classmethod
    def from_counts(cls, counts: Mapping[str, int], **kw) -> "FrequencyProvider":
        return cls(counts, LAPLACE, n_tokens=sum(counts.values()), n_types=len(counts), **kw)

    @property
    def multiword_rule(self) -> str:
        return "max" if self.policy == MAX_VALUE else "min"

    def frequency(self, word: str) -> float:
        """Untransformed per-token value, falling back per policy."""
        if self.policy == LAPLACE:
            return (self.values.get(word, 0) + 1) / (self.n_tokens + self.n_types)
        return self.values.get(word, self._fallback)

    def _transform(self, v: float) -> float:
        if self.transform == "log":
            return math.log(v)
        if self.transform == "negate":
            return -v
        return v

    def item_tokens(self, item: str) -> list[str]:
        tokens = self.tokenizer(item)
        if not self.include_special:
            tokens = [t for t in tokens if not is_special(t)]
        return tokens

    def value_for_item(self, item: str) -> float | None:
        """Transformed value for a word or phrase; ``None`` if it has no tokens."""
        tokens = self.item_tokens(item)
        if not tokens:
            log.warning("%s: item %r has no tokens, skipped", self.name, item)
            return None
        vals = [self.frequency(t) for t in tokens]
        combined = max(vals) if self.multiword_rule == "max" else min(vals)
        return self._transform(combined)

    def __repr__(self) -> str:
        return f"FrequencyProvider(name={self.name!r}, policy={self.policy!r}, transform={self.transform!r})"


def smoothed_frequency(provider: FrequencyProvider, word: str) -> float:
    """(count(word) + 1) / (#tokens + #types)."""
    if provider.policy != LAPLACE:
        raise ValueError("smoothed_frequency needs the laplace policy")
    return provider.frequency(word)


def value_for_item(provider: FrequencyProvider, item: str) -> float | None:
    return provider.value_for_item(item)


def read_external_list(path: str | os.PathLike) -> tuple[dict[str, float], dict[str, int]]:
    """Read a ``word<TAB>number`` list; returns values and ``#key=n`` header totals.

    Words are normalized; values of words that normalize alike are summed.
    A non-numeric first row is taken as a column header.
    """
    values: dict[str, float] = defaultdict(float)
    header: dict[str, int] = {}
    first = True
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                header.update((k, int(v)) for k, v in re.findall(r"#(\w+)=(\d+)", line))
                continue
            cols = line.split("\t")
            try:
                v = float(cols[1])
            except (ValueError, IndexError):
                if first:
                    first = False
                    continue
                raise TableError(f"{path}:{lineno}: expected word<TAB>number") from None
            first = False
            if not math.isfinite(v):
                raise TableError(f"{path}:{lineno}: non-finite value")
            values[normalize(cols[0].strip())] += v
    return dict(values), header


def load_provider(
    path: str | os.PathLike,
    policy: str | None = None,
    name: str = "",
    **kw,
) -> FrequencyProvider:
    """Provider from a frequency table or an external ``word  count|value`` list.

    Without an explicit policy, frequency tables and lists with known
    totals use ``laplace`` and other lists use ``min-frequency``.
    """
    path = Path(path)
    name = name or path.stem
    with open(path, encoding="utf-8") as f:
        head = [f.readline() for _ in range(3)]
    if any(h.startswith("word\tcount\tvideos\tchannels") for h in head):
        table = FrequencyTable.read(path)
        if policy not in (None, LAPLACE):
            counts = {w: float(r.count) for w, r in table.rows.items()}
            return FrequencyProvider(counts, policy, name=name, **kw)
        return FrequencyProvider.from_table(table, name=name, **kw)
    values, header = read_external_list(path)
    if policy is None:
        policy = LAPLACE if "tokens" in header else MIN_FREQUENCY
    if policy == LAPLACE:
        n_tokens = header.get("tokens", int(round(sum(values.values()))))
        n_types = header.get("types", len(values))
        return FrequencyProvider(values, LAPLACE, n_tokens=n_tokens, n_types=n_types, name=name, **kw)
    if policy == MAX_VALUE:
        # alike-normalizing words keep the largest value, not the sum
        values = _max_values(path)
    return FrequencyProvider(values, policy, name=name, **kw)


def _max_values(path: Path) -> dict[str, float]:
    out: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            cols = line.rstrip("\r\n").split("\t")
            if len(cols) < 2 or line.startswith("#"):
                continue
            try:
                v = float(cols[1])
            except ValueError:
                continue
            w = normalize(cols[0].strip())
            out[w] = max(v, out.get(w, -math.inf))
    return out


class FrequencyFeaturizer(BaseEstimator, TransformerMixin):
    """Turn rating items into a single-column feature of provider values.

    Items without tokens become NaN.
    """

    def __init__(self, provider: FrequencyProvider | None = None):
        self.provider = provider

    def fit(self, X, y=None):
        if self.provider is None:
            raise ValueError("FrequencyFeaturizer needs a provider")
        return self

    def transform(self, X: Sequence[str]) -> np.ndarray:
        vals = [self.provider.value_for_item(item) for item in X]
        return np.array([np.nan if v is None else v for v in vals], dtype=float).reshape(-1, 1)
