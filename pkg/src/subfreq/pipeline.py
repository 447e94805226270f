"""Stage orchestration: ingest, parse, clean, dedup, tokenize, count.

Each stage reads the previous stage's directory under the work directory
and writes its own, so any stage can be rerun on its own. A stage records
the hash of the configuration it depends on; with ``resume=True`` a stage
whose recorded hash matches is skipped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from ._toml import load_toml
from .corpus import StageDir, VideoRecord, load_manifest
from .filter import LanguageProfile, clean_document, load_profile, make_identifier
from .freq import FrequencyProvider, FrequencyTable, build_table, load_provider
from .neardup import eliminate, find_duplicates, report_rows, vectorize
from .stats import (
    compare_providers,
    fit_lcp,
    predict_and_score,
    preprocess_raw_rt,
    read_dataset,
    read_raw_rt,
)
from .textnorm import (
    PluginFailure,
    PluginSpec,
    PluginTokenizer,
    TokenStream,
    tokenize_document,
)
from .vtt import VttParseError, mark_special_regions, parse_vtt

log = logging.getLogger(__name__)

STAGES = ("ingest", "parse", "clean", "dedup", "tokenize", "count")
# config sections each stage depends on (cumulative through earlier stages)
_STAGE_KEYS = {
    "ingest": ("seed", "corpus"),
    "parse": ("parse",),
    "clean": ("filter",),
    "dedup": ("tokenize", "dedup"),
    "tokenize": (),
    "count": ("count",),
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workdir": "work",
    "jobs": 1,
    "corpus": {"manifest": "manifest.tsv", "language": None, "sample_cap": None},
    "parse": {"scroll_window": 1},
    "filter": {
        "identifier": "builtin",
        "min_target_fraction": 0.95,
        "min_lines": 3,
        "scripts": None,
        "profile": None,
    },
    "dedup": {"threshold": 0.95},
    "tokenize": {"variant": "regex", "plugin": None, "timeout": 30.0},
    "count": {"output": "frequency.tsv"},
}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str, ledger: "RunLedger | None" = None):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
        self.ledger = ledger


# -- configuration -----------------------------------------------------------


@dataclass
class PipelineConfig:
    data: dict[str, Any]
    base_dir: Path

    @classmethod
    def load(cls, path: str | os.PathLike, overrides: dict[str, dict] | None = None) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(load_toml(path), path.parent, overrides)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | os.PathLike = ".",
                  overrides: dict[str, dict] | None = None) -> "PipelineConfig":
        data = json.loads(json.dumps(DEFAULTS))
        for key, value in raw.items():
            if key not in data:
                raise ValueError(f"unknown config key {key!r}")
            if isinstance(data[key], dict):
                unknown = set(value) - set(data[key])
                if unknown:
                    raise ValueError(f"unknown keys in [{key}]: {sorted(unknown)}")
                data[key].update(value)
            else:
                data[key] = value
        for section, values in (overrides or {}).items():
            data[section].update({k: v for k, v in values.items() if v is not None})
        return cls(data, Path(base_dir))

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def workdir(self) -> Path:
        return self.path(self.data["workdir"])

    def canonical(self, keys: Iterable[str] | None = None) -> str:
        d = self.data if keys is None else {k: self.data[k] for k in keys}
        return json.dumps(d, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def hash(self, keys: Iterable[str] | None = None) -> str:
        return hashlib.sha256(self.canonical(keys).encode("utf-8")).hexdigest()[:16]

    def stage_hash(self, stage: str) -> str:
        keys: list[str] = []
        for s in STAGES[: STAGES.index(stage) + 1]:
            keys.extend(_STAGE_KEYS[s])
        return self.hash(keys)

    def profile(self) -> LanguageProfile:
        f = self.data["filter"]
        if f["profile"]:
            return load_profile(self.path(f["profile"]))
        d = {k: f[k] for k in ("min_target_fraction", "min_lines", "scripts")}
        d["language"] = self.language
        return LanguageProfile.from_dict(d)

    @property
    def language(self) -> str:
        lang = self.data["corpus"]["language"]
        if not lang:
            raise ValueError("corpus.language must be set")
        return lang

    def plugin_spec(self) -> PluginSpec | None:
        t = self.data["tokenize"]
        if not t["plugin"]:
            return None
        return PluginSpec.parse(t["plugin"], timeout=float(t["timeout"]))


# -- ledger ------------------------------------------------------------------


@dataclass
class RunLedger:
    ingested: int = 0
    parsed: int = 0
    cleaned: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    unique: int = 0
    duplicates_removed: int = 0
    tokenize_failed: int = 0
    tokens: int = 0
    types: int = 0
    config_hash: str = ""
    seed: int = 0
    timestamps: dict[str, float] = field(default_factory=dict)

    @property
    def n_rejected(self) -> int:
        return sum(self.rejected.values())

    def check(self) -> None:
        """Raise if the accounting identities do not hold."""
        if self.ingested != self.cleaned + self.n_rejected:
            raise AssertionError("ingested != cleaned + rejected")
        if self.unique > self.cleaned:
            raise AssertionError("unique > cleaned")

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "ingested": self.ingested,
            "parsed": self.parsed,
            "cleaned": self.cleaned,
            "rejected": dict(sorted(self.rejected.items())),
            "unique": self.unique,
            "duplicates_removed": self.duplicates_removed,
            "tokenize_failed": self.tokenize_failed,
            "tokens": self.tokens,
            "types": self.types,
        }

    def to_json(self) -> str:
        """Deterministic ledger (timestamps are written separately)."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunLedger":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


# -- stage helpers -------------------------------------------------------------


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _record_from_row(row: dict[str, str]) -> VideoRecord:
    return VideoRecord(
        row["video_id"], row["channel_id"], row["category"], float(row["duration_s"]),
        row["subtitle_path"], row["declared_language"],
    )


class Pipeline:
    def __init__(self, config: PipelineConfig, resume: bool = False):
        self.config = config
        self.resume = resume
        self.workdir = config.workdir
        self.jobs = int(config.data["jobs"])

    def stage(self, name: str) -> StageDir:
        return StageDir(self.workdir, name)

    def _fresh(self, name: str) -> bool:
        """True if the stage must run. Clears stale outputs when it must."""
        sd = self.stage(name)
        stamp = sd.path / "_stage.json"
        if self.resume and stamp.exists():
            recorded = json.loads(stamp.read_text())["hash"]
            if recorded == self.config.stage_hash(name):
                log.info("stage %s up to date, skipped", name)
                return False
        if sd.path.exists():
            shutil.rmtree(sd.path)
        sd.path.mkdir(parents=True)
        return True

    def _stamp(self, name: str) -> None:
        (self.stage(name).path / "_stage.json").write_text(
            json.dumps({"hash": self.config.stage_hash(name)}) + "\n"
        )

    def _require(self, name: str) -> StageDir:
        sd = self.stage(name)
        if not sd.exists():
            raise StageError(name, f"missing outputs in {sd.path}; run that stage first")
        return sd

    def records(self) -> list[VideoRecord]:
        return [_record_from_row(r) for r in self._require("ingest").read_meta()]

    # -- stages ------------------------------------------------------------

    def ingest(self) -> None:
        if not self._fresh("ingest"):
            return
        c = self.config.data["corpus"]
        try:
            manifest = load_manifest(
                self.config.path(c["manifest"]),
                language=self.config.language,
                sample_cap=c["sample_cap"],
                seed=int(self.config.data["seed"]),
            )
        except (OSError, ValueError) as e:
            raise StageError("ingest", str(e)) from None
        sd = self.stage("ingest")
        base = manifest.base_dir
        rows = []
        for r in manifest.records:
            row = dict(vars(r))
            row["subtitle_path"] = os.path.relpath(base / r.subtitle_path, self.workdir)
            row["duration_s"] = repr(r.duration_s)
            rows.append(row)
        sd.write_meta(["video_id", "channel_id", "category", "duration_s",
                       "declared_language", "subtitle_path"], rows)
        self._stamp("ingest")

    def parse(self) -> None:
        records = self.records()
        if not self._fresh("parse"):
            return
        window = int(self.config.data["parse"]["scroll_window"])
        sd = self.stage("parse")
        meta = []
        for rec, (lines, n_cues, warnings, status) in zip(
            records,
            _map(_ParseJob(self.workdir, window), records, self.jobs),
        ):
            if status == "ok":
                sd.write_doc(rec.video_id, lines)
            meta.append({"video_id": rec.video_id, "status": status, "cues": n_cues,
                         "lines": len(lines), "warnings": warnings})
        sd.write_meta(["video_id", "status", "cues", "lines", "warnings"], meta)
        self._stamp("parse")

    def clean(self) -> None:
        parsed = self._require("parse")
        meta_in = parsed.read_meta()
        if not self._fresh("clean"):
            return
        profile = self.config.profile()
        job = _CleanJob(profile, self.config.data["filter"]["identifier"], str(parsed.path))
        sd = self.stage("clean")
        meta, rejected = [], []
        for row, res in zip(meta_in, _map(job, meta_in, self.jobs)):
            vid = row["video_id"]
            status, lines, detail, fraction = res
            if status == "ok":
                sd.write_doc(vid, lines)
            else:
                rejected.append({"video_id": vid, "reason": status, "detail": detail})
            meta.append({"video_id": vid, "status": status, "target_fraction": f"{fraction:.6f}",
                         "lines": len(lines)})
        sd.write_meta(["video_id", "status", "target_fraction", "lines"], meta)
        with open(sd.path / "rejected.tsv", "w", encoding="utf-8", newline="\n") as f:
            f.write("video_id\treason\tdetail\n")
            for r in rejected:
                f.write(f"{r['video_id']}\t{r['reason']}\t{r['detail']}\n")
        self._stamp("clean")

    def dedup_variant(self) -> str:
        """Token stream used for similarity: the plugin's default variant, else regex."""
        return "default" if self.config.plugin_spec() is not None else "regex"

    def _tokenize_all(self, ids: list[str], source: StageDir, variant: str,
                      stage: str) -> dict[str, list[str] | None]:
        out: dict[str, list[str] | None] = {}
        if variant == "regex":
            for vid in ids:
                out[vid] = tokenize_document(source.read_doc(vid)).tokens
            return out
        spec = self.config.plugin_spec()
        if spec is None:
            raise StageError(stage, f"variant {variant!r} needs tokenize.plugin")
        plugin = PluginTokenizer(spec, variant)
        try:
            for vid in ids:
                try:
                    out[vid] = plugin.tokenize_lines(source.read_doc(vid))
                except PluginFailure as e:
                    log.warning("%s: tokenizer plugin failed: %s", vid, e)
                    out[vid] = None
        finally:
            plugin.close()
        return out

    def dedup(self) -> None:
        cleaned = self._require("clean")
        ids = [r["video_id"] for r in cleaned.read_meta() if r["status"] == "ok"]
        if not self._fresh("dedup"):
            return
        sd = self.stage("dedup")
        tokens = self._tokenize_all(ids, cleaned, self.dedup_variant(), "dedup")
        usable = {vid: t for vid, t in tokens.items() if t}
        for vid, t in usable.items():
            sd.write_doc(vid, t)
        threshold = float(self.config.data["dedup"]["threshold"])
        if usable:
            graph = find_duplicates(vectorize(usable), threshold,
                                    {k: len(v) for k, v in usable.items()})
            removed = eliminate(graph)
            report = report_rows(graph, removed)
        else:
            removed, report = set(), []
        meta = []
        for vid in ids:
            t = tokens[vid]
            status = ("failed" if t is None else "empty" if not t
                      else "removed" if vid in removed else "kept")
            meta.append({"video_id": vid, "status": status, "tokens": len(t or [])})
        sd.write_meta(["video_id", "status", "tokens"], meta)
        with open(sd.path / "report.tsv", "w", encoding="utf-8", newline="\n") as f:
            f.write("removed_video_id\tkept_neighbor_id\tcosine\n")
            for a, b, c in report:
                f.write(f"{a}\t{b}\t{c:.6f}\n")
        self._stamp("dedup")

    def tokenize(self) -> None:
        dd = self._require("dedup")
        kept = [r["video_id"] for r in dd.read_meta() if r["status"] == "kept"]
        if not self._fresh("tokenize"):
            return
        sd = self.stage("tokenize")
        variant = self.config.data["tokenize"]["variant"]
        if variant == self.dedup_variant():
            tokens = {vid: dd.read_doc(vid) for vid in kept}
        else:
            tokens = self._tokenize_all(kept, self.stage("clean"), variant, "tokenize")
        meta = []
        for vid in kept:
            t = tokens[vid]
            if t is not None:
                sd.write_doc(vid, t)
            meta.append({"video_id": vid, "status": "failed" if t is None else "ok",
                         "tokens": len(t or [])})
        sd.write_meta(["video_id", "status", "tokens"], meta)
        self._stamp("tokenize")

    def count(self) -> FrequencyTable:
        tk = self._require("tokenize")
        by_id = {r.video_id: r for r in self.records()}
        variant = self.config.data["tokenize"]["variant"]
        streams = [
            TokenStream(by_id[row["video_id"]], tk.read_doc(row["video_id"]), variant)
            for row in tk.read_meta()
            if row["status"] == "ok"
        ]
        table = build_table(streams, self.config.language, variant)
        self.workdir.mkdir(parents=True, exist_ok=True)
        table.write(self.workdir / self.config.data["count"]["output"])
        return table

    # -- whole run ---------------------------------------------------------

    def ledger(self) -> RunLedger:
        led = RunLedger(config_hash=self.config.hash(), seed=int(self.config.data["seed"]))
        led.ingested = len(self._require("ingest").read_meta())
        parse_meta = self._require("parse").read_meta()
        led.parsed = sum(r["status"] == "ok" for r in parse_meta)
        # clean carries parse failures forward, so its meta covers every rejection
        rejected: dict[str, int] = {}
        for r in self._require("clean").read_meta():
            if r["status"] == "ok":
                led.cleaned += 1
            else:
                rejected[r["status"]] = rejected.get(r["status"], 0) + 1
        led.rejected = rejected
        for r in self._require("dedup").read_meta():
            led.unique += r["status"] == "kept"
            led.duplicates_removed += r["status"] == "removed"
            led.tokenize_failed += r["status"] == "failed"
        for r in self._require("tokenize").read_meta():
            led.tokenize_failed += r["status"] == "failed"
        table_path = self.workdir / self.config.data["count"]["output"]
        if table_path.exists():
            table = FrequencyTable.read(table_path)
            led.tokens, led.types = table.n_tokens, table.n_types
        return led

    def run(self, stages: Iterable[str] = STAGES) -> RunLedger:
        times: dict[str, float] = {"start": time.time()}
        self.workdir.mkdir(parents=True, exist_ok=True)
        (self.workdir / "config.json").write_text(
            json.dumps(self.config.data, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        for name in stages:
            try:
                getattr(self, name)()
            except StageError:
                raise
            except Exception as e:
                partial = None
                try:
                    partial = self.ledger()
                except StageError:
                    pass
                raise StageError(name, f"{type(e).__name__}: {e}", partial) from e
            times[name] = time.time()
        led = self.ledger()
        led.timestamps = times
        led.check()
        (self.workdir / "ledger.json").write_text(led.to_json(), encoding="utf-8")
        (self.workdir / "timestamps.json").write_text(json.dumps(times, indent=2) + "\n")
        return led


class _ParseJob:
    def __init__(self, workdir: Path, window: int):
        self.workdir = workdir
        self.window = window

    def __call__(self, rec: VideoRecord):
        from .vtt import collapse_scrolling

        try:
            data = (self.workdir / rec.subtitle_path).read_bytes()
            doc = parse_vtt(data, rec)
        except (OSError, VttParseError) as e:
            log.warning("%s: unparseable: %s", rec.video_id, e)
            return [], 0, 0, "unparseable"
        lines = collapse_scrolling(doc.cues, self.window) if self.window != 1 else doc.text_lines
        lines = [ln for ln in (mark_special_regions(x).strip() for x in lines) if ln]
        return lines, len(doc.cues), len(doc.warnings), "ok"


class _CleanJob:
    def __init__(self, profile: LanguageProfile, identifier: str, parse_dir: str):
        self.profile = profile
        self.identifier_name = identifier
        self.parse_dir = parse_dir
        self._identifier = None

    def __call__(self, row: dict[str, str]):
        from .vtt import SubtitleDocument

        if row["status"] != "ok":
            return row["status"], [], "", 0.0
        if self._identifier is None:
            self._identifier = make_identifier(self.identifier_name)
        sd = StageDir(os.path.dirname(self.parse_dir), os.path.basename(self.parse_dir))
        doc = SubtitleDocument(None, [], sd.read_doc(row["video_id"]))
        res = clean_document(doc, self.profile, self._identifier)
        if res.accepted:
            return "ok", res.document.text_lines, "", res.target_fraction
        return res.reason, [], res.detail, res.target_fraction

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_identifier"] = None
        return d


def run_pipeline(config_path: str | os.PathLike, resume: bool = False,
                 overrides: dict[str, dict] | None = None) -> RunLedger:
    return Pipeline(PipelineConfig.load(config_path, overrides), resume).run()


# -- evaluation ----------------------------------------------------------------


def _load_eval_config(path: Path) -> dict:
    cfg = load_toml(path)
    if "baseline" not in cfg or not cfg.get("providers"):
        raise ValueError(f"{path}: needs 'baseline' and at least one [[providers]]")
    return cfg


def load_providers(cfg: dict, base: Path, policy_override: str | None = None) -> dict[str, FrequencyProvider]:
    out = {}
    missing = []
    for p in cfg["providers"]:
        path = Path(p["path"])
        path = path if path.is_absolute() else base / path
        if not path.exists():
            missing.append(str(path))
            continue
        out[p["name"]] = load_provider(
            path,
            policy=p.get("policy") or policy_override,
            name=p["name"],
            include_special=bool(p.get("include_special", False)),
        )
    if missing:
        raise FileNotFoundError("missing provider files: " + ", ".join(missing))
    return out


def _load_dataset(d: dict, base: Path):
    path = base / d["path"]
    kind = d.get("kind", "familiarity")
    if d.get("raw_rt"):
        return preprocess_raw_rt(read_raw_rt(path), name=d["name"], language=d.get("language", ""))
    return read_dataset(path, d["name"], d.get("language", ""), kind)


def run_eval(config_path: str | os.PathLike, mode: str = "all", output: str | None = None,
             policy: str | None = None) -> dict[str, dict]:
    """Correlation (``corr``) and/or regression (``lcp``) reports per dataset.

    Writes ``<output>/<dataset>.tsv`` and ``<output>/<dataset>.json``.
    """
    config_path = Path(config_path)
    base = config_path.parent
    cfg = _load_eval_config(config_path)
    providers = load_providers(cfg, base, policy)
    out_dir = base / (output or cfg.get("output", "reports"))
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = {}
    for d in cfg.get("datasets", []):
        if mode == "lcp" and not d.get("trial"):
            log.info("%s: no trial split; skipped for regression", d.get("name"))
            continue
        ds = _load_dataset(d, base)
        if mode in ("all", "corr"):
            report = compare_providers(providers, cfg["baseline"], ds)
        else:
            from .stats import ComparisonReport

            report = ComparisonReport(ds.name, cfg["baseline"], [])
        if mode in ("all", "lcp") and d.get("trial"):
            trial = read_dataset(base / d["trial"], d["name"] + ":trial", ds.language, "complexity")
            for name, prov in providers.items():
                model = fit_lcp(trial, prov)
                r2, r, _ = predict_and_score(model, ds, prov)
                report.regression[name] = {
                    "slope": model.slope, "intercept": model.intercept, "r2": r2, "r": r,
                }
        (out_dir / f"{ds.name}.json").write_text(
            json.dumps(report.to_dict(), indent=2, allow_nan=True) + "\n", encoding="utf-8")
        tsv = report.to_tsv()
        if report.regression:
            tsv += "\nprovider\tslope\tintercept\tr2\tr\n" + "".join(
                f"{n}\t{v['slope']:.6f}\t{v['intercept']:.6f}\t{v['r2']:.6f}\t{v['r']:.6f}\n"
                for n, v in report.regression.items())
        (out_dir / f"{ds.name}.tsv").write_text(tsv, encoding="utf-8")
        reports[ds.name] = report.to_dict()
    return reports
