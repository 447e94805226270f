"""Command line entry point: ``subfreq <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .freq import POLICIES, load_provider
from .pipeline import STAGES, Pipeline, PipelineConfig, RunLedger, StageError, run_eval

log = logging.getLogger("subfreq")


def _overrides(args: argparse.Namespace) -> dict[str, dict]:
    out: dict[str, dict] = {"filter": {}, "dedup": {}}
    if getattr(args, "dup_threshold", None) is not None:
        out["dedup"]["threshold"] = args.dup_threshold
    if getattr(args, "min_target_fraction", None) is not None:
        out["filter"]["min_target_fraction"] = args.min_target_fraction
    return out


def _pipeline(args: argparse.Namespace) -> Pipeline:
    config = PipelineConfig.load(args.config, _overrides(args))
    if args.jobs is not None:
        config.data["jobs"] = args.jobs
    return Pipeline(config, resume=args.resume)


def cmd_stage(args: argparse.Namespace) -> int:
    pipe = _pipeline(args)
    if args.command == "run":
        led = pipe.run()
        print(led.to_json(), end="")
    elif args.command == "count":
        led = pipe.run(["count"])
        print(led.to_json(), end="")
    else:
        getattr(pipe, args.command)()
    return 0


def cmd_lookup(args: argparse.Namespace) -> int:
    if args.table:
        path = Path(args.table)
    elif args.config:
        config = PipelineConfig.load(args.config)
        path = config.workdir / config.data["count"]["output"]
    else:
        raise SystemExit("lookup needs --table or --config")
    provider = load_provider(path, policy=args.policy, include_special=args.include_special)
    tokens = provider.item_tokens(args.word)
    count = ""
    if provider.policy == "laplace":
        count = ",".join(str(int(provider.values.get(t, 0))) for t in tokens)
    value = provider.value_for_item(args.word)
    print("item\ttokens\tcount\tvalue")
    print(f"{args.word}\t{' '.join(tokens)}\t{count}\t{'' if value is None else repr(value)}")
    if provider.policy == "laplace" and len(tokens) == 1:
        f = provider.frequency(tokens[0])
        print(f"# smoothed frequency {f!r} (per million {f * 1e6:.4f}, ln {math.log(f):.6f})")
    return 0 if value is not None else 1


def cmd_eval(args: argparse.Namespace) -> int:
    mode = "corr" if args.command == "eval-corr" else "lcp"
    reports = run_eval(args.config, mode, output=args.output, policy=args.policy)
    if not reports:
        print("no datasets to report" + (" (regression needs a trial split)" if mode == "lcp" else ""))
    for name, rep in reports.items():
        print(f"== {name} (baseline {rep['baseline']})")
        for r in rep["rows"]:
            p = "" if r["p_vs_baseline"] is None else f"p={r['p_vs_baseline']:.3g}"
            print(f"{r['provider']}\tr={r['r']:.4f}{r['stars']}\tn={r['n']}\t{p}")
        for prov, reg in rep["regression"].items():
            print(f"{prov}\tR2={reg['r2']:.4f}\tr={reg['r']:.4f}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.workdir:
        workdir = Path(args.workdir)
    else:
        workdir = PipelineConfig.load(args.config).workdir
    path = workdir / "ledger.json"
    if not path.exists():
        raise SystemExit(f"no ledger at {path}; run the pipeline first")
    led = RunLedger.from_dict(json.loads(path.read_text(encoding="utf-8")))
    print("stage\tcount")
    print(f"found\t{led.ingested}")
    print(f"cleaned\t{led.cleaned}")
    for reason, n in sorted(led.rejected.items()):
        print(f"rejected:{reason}\t{n}")
    print(f"unique\t{led.unique}")
    print(f"tokens\t{led.tokens}")
    print(f"types\t{led.types}")
    print(f"# config {led.config_hash} seed {led.seed}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subfreq", description="Subtitle word frequency corpus builder.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("run",) + STAGES:
        s = sub.add_parser(name, help="run all stages" if name == "run" else f"run the {name} stage")
        s.add_argument("--config", required=True, help="pipeline config (TOML)")
        s.add_argument("--resume", action="store_true", help="skip stages whose config is unchanged")
        s.add_argument("--jobs", type=int, default=None, help="worker processes per stage")
        s.add_argument("--dup-threshold", type=float, default=None)
        s.add_argument("--min-target-fraction", type=float, default=None)
        s.set_defaults(func=cmd_stage)

    s = sub.add_parser("lookup", help="frequency of a word or phrase")
    s.add_argument("word")
    s.add_argument("--table", help="frequency table or external list")
    s.add_argument("--config", help="pipeline config; uses its frequency table")
    s.add_argument("--policy", choices=POLICIES, default=None)
    s.add_argument("--include-special", action="store_true")
    s.set_defaults(func=cmd_lookup)

    for name in ("eval-corr", "eval-lcp"):
        s = sub.add_parser(name, help="correlation reports" if name == "eval-corr" else "complexity regression")
        s.add_argument("--config", required=True, help="evaluation config (TOML)")
        s.add_argument("--output", default=None, help="report directory")
        s.add_argument("--policy", choices=POLICIES, default=None,
                       help="policy for providers that do not set one")
        s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="print the run ledger")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--workdir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        if e.ledger is not None:
            print("partial ledger:\n" + e.ledger.to_json(), file=sys.stderr, end="")
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
