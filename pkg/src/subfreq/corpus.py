"""Manifest ingest, seeded sampling and on-disk stage layouts."""

from __future__ import annotations

import csv
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

MANIFEST_COLUMNS = (
    "video_id",
    "channel_id",
    "category",
    "duration_s",
    "declared_language",
    "subtitle_path",
)


class ManifestError(ValueError):
    """Raised for malformed manifests, duplicate ids or unreadable subtitles."""


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    channel_id: str
    category: str
    duration_s: float
    subtitle_path: str
    declared_language: str

    def __post_init__(self):
        if not self.video_id:
            raise ManifestError("empty video id")
        if not self.category:
            raise ManifestError(f"empty category for video {self.video_id}")
        if self.duration_s < 0:
            raise ManifestError(f"negative duration for video {self.video_id}")


@dataclass(frozen=True)
class CorpusManifest:
    language: str
    records: tuple[VideoRecord, ...]
    sample_cap: int | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.video_id in seen:
                raise ManifestError(f"duplicate video id {rec.video_id}")
            seen.add(rec.video_id)
            if rec.declared_language != self.language:
                raise ManifestError(
                    f"video {rec.video_id} declares language "
                    f"{rec.declared_language!r}, manifest is {self.language!r}"
                )
        if self.sample_cap is not None:
            if self.sample_cap < 1:
                raise ManifestError("sample_cap must be a positive integer")
            if len(self.records) > self.sample_cap:
                raise ManifestError(
                    f"{len(self.records)} records exceed sample_cap {self.sample_cap}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[VideoRecord]:
        return iter(self.records)

    def subtitle_file(self, rec: VideoRecord) -> Path:
        return self.base_dir / rec.subtitle_path

    def ids(self) -> list[str]:
        return [r.video_id for r in self.records]


def _iter_rows(path: Path) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_manifest(
    path: str | os.PathLike,
    language: str | None = None,
    sample_cap: int | None = None,
    seed: int = 0,
    check_files: bool = True,
) -> CorpusManifest:
    """Load a tab-separated manifest.

    Subtitle paths are resolved relative to the manifest's directory. When
    ``language`` is omitted it is taken from the first record. When
    ``sample_cap`` is given the records are reduced with
    :func:`sample_records` using ``seed``.
    """
    path = Path(path)
    base = path.parent
    records: list[VideoRecord] = []
    lines_of: dict[str, int] = {}
    for lineno, cols in _iter_rows(path):
        if len(cols) != len(MANIFEST_COLUMNS):
            raise ManifestError(
                f"{path}:{lineno}: expected {len(MANIFEST_COLUMNS)} tab-separated "
                f"columns, got {len(cols)}"
            )
        vid, channel, category, duration, lang, sub_path = (c.strip() for c in cols)
        try:
            duration_s = float(duration)
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: invalid duration {duration!r}") from None
        if vid in lines_of:
            raise ManifestError(f"duplicate video id {vid} (lines {lines_of[vid]} and {lineno})")
        try:
            rec = VideoRecord(vid, channel, category, duration_s, sub_path, lang)
        except ManifestError as e:
            raise ManifestError(f"{path}:{lineno}: {e}") from None
        if check_files and not os.access(base / sub_path, os.R_OK):
            raise ManifestError(f"{path}:{lineno}: missing subtitle file {base / sub_path}")
        lines_of[vid] = lineno
        records.append(rec)

    if language is None:
        language = records[0].declared_language if records else ""
    manifest = CorpusManifest(language, tuple(records), None, base)
    if sample_cap is not None:
        manifest = sample_records(manifest, sample_cap, seed)
    return manifest


def write_manifest(manifest: CorpusManifest, path: str | os.PathLike) -> None:
    """Write ``manifest`` so that :func:`load_manifest` reproduces it.

    Subtitle paths are rewritten relative to the new manifest location.
    """
    path = Path(path)
    out_base = path.parent
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("#" + "\t".join(MANIFEST_COLUMNS) + "\n")
        for r in manifest.records:
            sub = Path(os.path.relpath(manifest.base_dir / r.subtitle_path, out_base))
            f.write(
                "\t".join(
                    [
                        r.video_id,
                        r.channel_id,
                        r.category,
                        repr(r.duration_s),
                        r.declared_language,
                        sub.as_posix(),
                    ]
                )
                + "\n"
            )


def reservoir_indices(n_items: int, cap: int, rng: random.Random) -> list[int]:
    """Algorithm R over ``range(n_items)``; returns sorted surviving indices."""
    reservoir = list(range(min(cap, n_items)))
    for i in range(cap, n_items):
        j = rng.randint(0, i)
        if j < cap:
            reservoir[j] = i
    return sorted(reservoir)


def sample_records(manifest: CorpusManifest, cap: int, seed: int) -> CorpusManifest:
    """Uniform sample of at most ``cap`` records without replacement.

    Survivors keep their manifest order. If ``cap`` is at least the number
    of records the manifest is returned unchanged.
    """
    if cap < 1:
        raise ManifestError("sample cap must be >= 1")
    if cap >= len(manifest.records):
        return manifest
    keep = reservoir_indices(len(manifest.records), cap, random.Random(seed))
    records = tuple(manifest.records[i] for i in keep)
    return replace(manifest, records=records, sample_cap=cap)


# -- stage layouts -----------------------------------------------------------

META_NAME = "_meta.tsv"


class StageDir:
    """``<workdir>/<stage>/<video_id>.txt`` plus a ``_meta.tsv`` summary."""

    def __init__(self, workdir: str | os.PathLike, stage: str):
        self.path = Path(workdir) / stage
        self.stage = stage

    def doc_path(self, video_id: str) -> Path:
        return self.path / f"{video_id}.txt"

    def write_doc(self, video_id: str, lines: Iterable[str]) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        with open(self.doc_path(video_id), "w", encoding="utf-8", newline="\n") as f:
            for line in lines:
                f.write(line + "\n")

    def read_doc(self, video_id: str) -> list[str]:
        with open(self.doc_path(video_id), encoding="utf-8") as f:
            return [line.rstrip("\n") for line in f]

    def write_meta(self, columns: Sequence[str], rows: Iterable[Mapping[str, object]]) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        with open(self.path / META_NAME, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, delimiter="\t", lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([row.get(c, "") for c in columns])

    def read_meta(self) -> list[dict[str, str]]:
        with open(self.path / META_NAME, encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f, delimiter="\t"))

    def exists(self) -> bool:
        return (self.path / META_NAME).exists()
